"""Estimators: Rabi fits, fringe visibilities, fidelity bound, CHSH statistics.

Nonlinear fits follow a two-stage scheme: a coarse grid over the parameter
that can alias (oscillation frequency, fringe phase) selects a starting
point, then a weighted least-squares refinement polishes all parameters and
supplies the covariance used for quoted uncertainties.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Sequence

import numpy as np
from scipy.optimize import least_squares

from .errors import FitError
from .montecarlo import CountsTable

_TWO_PI = 2.0 * math.pi


@dataclass(frozen=True)
class RabiFit:
    """Damped-oscillation fit of an excitation-probability scan."""

    omega: float  # rad/ns
    omega_err: float
    decay_time: float  # ns
    amplitude: float
    offset: float
    residual_norm: float

    @property
    def pi_time(self) -> float:
        return math.pi / self.omega


@dataclass(frozen=True)
class FringeFit:
    """Sinusoidal fringe fit C(phi) = C0 * (1 + V cos(phi - phi0))."""

    visibility: float
    visibility_err: float
    phase_offset: float
    mean_level: float
    minus_visibility: float | None = None


@dataclass(frozen=True)
class BellResult:
    """CHSH statistic assembled from four correlation values."""

    e_values: tuple[tuple[float, float], ...]
    s_value: float
    sigma_s: float
    violation_sigmas: float


def _rabi_model(t, offset, amplitude, omega, tau):
    return offset + 0.5 * amplitude * (1.0 - np.cos(omega * t) * np.exp(-t / tau))


def fit_rabi(
    series: Sequence[tuple[float, float]],
    shots_per_point: int | None = None,
) -> RabiFit:
    """Fit P(t) = offset + (A/2)(1 - cos(w t) e^{-t/tau}) to an excitation scan.

    ``series`` holds (duration ns, excitation frequency) pairs; at least 8
    points spanning one oscillation period are required. A coarse frequency
    grid keeps the refinement away from aliased minima.
    """
    pts = sorted((float(t), float(y)) for t, y in series)
    if len(pts) < 8:
        raise FitError(f"need at least 8 points, got {len(pts)}")
    t = np.array([p[0] for p in pts])
    y = np.array([p[1] for p in pts])
    span = float(t[-1] - t[0])
    if span <= 0:
        raise FitError("durations are all identical")
    if float(np.ptp(y)) < 1e-9:
        raise FitError("degenerate data: excitation frequency is constant")

    if shots_per_point:
        var = np.clip(y * (1.0 - y), 1e-6, None) / shots_per_point
        sigma = np.sqrt(var)
    else:
        sigma = np.ones_like(y)

    dt_min = float(np.min(np.diff(t))) or span
    omega_lo = _TWO_PI / (2.0 * span)  # at least half a cycle over the scan
    omega_hi = math.pi / dt_min  # Nyquist for the closest spacing
    if omega_hi <= omega_lo:
        omega_hi = 4.0 * omega_lo
    grid = np.geomspace(omega_lo, omega_hi, 256)
    # Decay parameterized as a rate so "no decay" sits at the 0 bound.
    rate0 = 0.25 / span
    rate_max = 20.0 / span

    best = None
    for omega in grid:
        # Linear solve for (offset, amplitude) at fixed omega and rate.
        basis = 0.5 * (1.0 - np.cos(omega * t) * np.exp(-t * rate0))
        a_mat = np.stack([np.ones_like(t), basis], axis=1) / sigma[:, None]
        coef, *_ = np.linalg.lstsq(a_mat, y / sigma, rcond=None)
        resid = coef[0] + coef[1] * basis - y
        score = float(np.sum((resid / sigma) ** 2))
        if best is None or score < best[0]:
            best = (score, (coef[0], coef[1], omega))

    offset0, amp0, omega0 = best[1]

    def residuals(p):
        offset, amplitude, omega, rate = p
        model = offset + 0.5 * amplitude * (1.0 - np.cos(omega * t) * np.exp(-t * rate))
        return (y - model) / sigma

    try:
        result = least_squares(
            residuals,
            x0=[float(np.clip(offset0, -0.9, 0.9)), float(np.clip(amp0, 1e-3, 1.9)), omega0, rate0],
            bounds=([-1.0, 0.0, omega_lo / 4.0, 0.0], [1.0, 2.0, omega_hi * 4.0, rate_max]),
            max_nfev=5000,
        )
    except Exception as exc:  # scipy raises ValueError on bad x0 etc.
        raise FitError(f"rabi refinement failed: {exc}") from exc
    if result.status <= 0:
        raise FitError(f"rabi fit did not converge: {result.message}")

    offset, amplitude, omega, rate = result.x
    cov = _covariance(result.jac)
    omega_err = math.sqrt(cov[2, 2]) if cov is not None else float("nan")
    if omega <= 0:
        raise FitError("fit landed on a non-positive frequency")
    if span * omega < _TWO_PI * 0.5:
        raise FitError("scan spans less than one oscillation period")
    return RabiFit(
        omega=float(omega),
        omega_err=float(omega_err),
        decay_time=float(1.0 / rate) if rate > 1e-6 else math.inf,
        amplitude=float(amplitude),
        offset=float(offset),
        residual_norm=float(np.linalg.norm(result.fun)),
    )


def _covariance(jac: np.ndarray) -> np.ndarray | None:
    jtj = jac.T @ jac
    try:
        return np.linalg.inv(jtj)
    except np.linalg.LinAlgError:
        return None


def _fit_single_fringe(phases, counts, sign):
    """Weighted fit of counts = C0 (1 + sign * V cos(phi - phi0))."""
    sigma = np.sqrt(np.clip(counts, 1.0, None))

    best = None
    for phi0 in np.linspace(0.0, _TWO_PI, 24, endpoint=False):
        basis = sign * np.cos(phases - phi0)
        a_mat = np.stack([np.ones_like(phases), basis], axis=1) / sigma[:, None]
        coef, *_ = np.linalg.lstsq(a_mat, counts / sigma, rcond=None)
        resid = float(np.sum((counts - (coef[0] + coef[1] * basis)) ** 2 / sigma**2))
        if coef[1] < 0:
            # (phi0, -A) and (phi0 + pi, +A) tie; keep the positive-amplitude
            # form so the refinement never starts on the V = 0 saddle.
            coef = (coef[0], -coef[1])
            phi0 = (phi0 + math.pi) % _TWO_PI
        if best is None or resid < best[0]:
            best = (resid, phi0, coef)

    _, phi0_0, coef0 = best
    c0_0 = max(float(coef0[0]), 1e-9)
    v0 = float(np.clip(coef0[1] / c0_0, 1e-6, 1.0))

    def residuals(p):
        c0, v, phi0 = p
        return (counts - c0 * (1.0 + sign * v * np.cos(phases - phi0))) / sigma

    result = least_squares(residuals, x0=[c0_0, v0, phi0_0], bounds=([0.0, 0.0, -_TWO_PI], [np.inf, 1.5, 2 * _TWO_PI]))
    if not result.success:
        raise FitError(f"fringe fit did not converge: {result.message}")
    c0, v, phi0 = result.x
    cov = _covariance(result.jac)
    v_err = math.sqrt(abs(cov[1, 1])) if cov is not None else float("nan")
    return float(c0), float(v), float(phi0 % _TWO_PI), float(v_err)


def fit_fringe(series: Sequence[tuple[float, float, float]]) -> FringeFit:
    """Fit complementary sinusoids to plus/minus counts against phase.

    ``series`` holds (phase, counts_plus, counts_minus). The plus port
    carries the quoted visibility; the minus port is fitted with opposite
    sign as a consistency check. Needs at least 5 points covering a full
    period (endpoint-exclusive grids accepted).
    """
    pts = sorted((float(p), float(cp), float(cm)) for p, cp, cm in series)
    if len(pts) < 5:
        raise FitError(f"need at least 5 phase points, got {len(pts)}")
    phases = np.array([p[0] for p in pts])
    plus = np.array([p[1] for p in pts])
    minus = np.array([p[2] for p in pts])
    span = float(phases[-1] - phases[0])
    if span < 0.8 * _TWO_PI:
        raise FitError(f"phase span {span:.3f} does not cover a full period")
    if np.all(plus <= 0) and np.all(minus <= 0):
        raise FitError("degenerate series: no counts")

    c0, v, phi0, v_err = _fit_single_fringe(phases, plus, +1.0)
    v_minus = None
    if np.any(minus > 0):
        _, v_minus, _, vm_err = _fit_single_fringe(phases, minus, -1.0)
        tol = 6.0 * math.hypot(v_err if math.isfinite(v_err) else 0.05, vm_err if math.isfinite(vm_err) else 0.05) + 0.05
        if abs(v - v_minus) > tol:
            raise FitError(
                f"plus/minus port visibilities inconsistent: {v:.4f} vs {v_minus:.4f}"
            )
    return FringeFit(
        visibility=float(np.clip(v, 0.0, 1.0)),
        visibility_err=v_err,
        phase_offset=phi0,
        mean_level=c0,
        minus_visibility=v_minus,
    )


def fidelity_bound(
    v1: float,
    v2: float,
    v1_err: float | None = None,
    v2_err: float | None = None,
):
    """Bell-state fidelity lower bound (1 + V1 + 2*V2) / 4.

    Returns a float, or a (value, sigma) pair when both uncertainties are
    supplied; sigma = sqrt(sigma1^2 + 4*sigma2^2) / 4.
    """
    if not 0.0 <= v1 <= 1.0 or not 0.0 <= v2 <= 1.0:
        raise FitError(f"visibilities must be in [0,1], got {(v1, v2)}")
    value = (1.0 + v1 + 2.0 * v2) / 4.0
    if v1_err is None and v2_err is None:
        return value
    if v1_err is None or v2_err is None:
        raise FitError("supply both uncertainties or neither")
    return value, math.sqrt(v1_err**2 + 4.0 * v2_err**2) / 4.0


def correlation_E(counts: CountsTable) -> tuple[float, float]:
    """Joint expectation value from post-selected coincidences.

    E = (N_parallel - N_cross) / N_total with binomial error propagation;
    no-click outcomes are excluded from the normalization.
    """
    par = counts.count("plus_port", "plus_port") + counts.count("minus_port", "minus_port")
    cross = counts.count("plus_port", "minus_port") + counts.count("minus_port", "plus_port")
    total = par + cross
    if total == 0:
        raise FitError("no coincidences recorded for this settings pair")
    e = (par - cross) / total
    sigma = math.sqrt(max(1.0 - e * e, 0.0) / total)
    return float(e), float(sigma)


def chsh_S(
    e_ab: tuple[float, float],
    e_astar_b: tuple[float, float],
    e_a_bstar: tuple[float, float],
    e_astar_bstar: tuple[float, float],
) -> BellResult:
    """S = |E(a,b) + E(a*,b) + E(a,b*) - E(a*,b*)| with quadrature errors."""
    e_values = (e_ab, e_astar_b, e_a_bstar, e_astar_bstar)
    for e, _ in e_values:
        if abs(e) > 1.0 + 1e-9:
            raise FitError(f"correlation value out of range: {e}")
    s = abs(e_ab[0] + e_astar_b[0] + e_a_bstar[0] - e_astar_bstar[0])
    sigma_s = math.sqrt(sum(sig**2 for _, sig in e_values))
    violation = (s - 2.0) / sigma_s if sigma_s > 0 else math.inf
    return BellResult(e_values, float(s), float(sigma_s), float(violation))


def fringe_series(tables: Sequence[CountsTable], register: int = 2) -> list[tuple[float, float, float]]:
    """(phase, plus clicks, minus clicks) per scan point for one register."""
    out = []
    for table in tables:
        clicks = table.register_clicks(register)
        out.append((float(table.grid_value), float(clicks["plus_port"]), float(clicks["minus_port"])))
    return out


def coincidence_fringe_series(tables: Sequence[CountsTable]) -> list[tuple[float, float, float]]:
    """(phase, parallel coincidences, cross coincidences) per scan point."""
    out = []
    for table in tables:
        par = table.count("plus_port", "plus_port") + table.count("minus_port", "minus_port")
        cross = table.count("plus_port", "minus_port") + table.count("minus_port", "plus_port")
        out.append((float(table.grid_value), float(par), float(cross)))
    return out


def rabi_series(tables: Sequence[CountsTable], register: int = 2) -> list[tuple[float, float]]:
    """(grid value, excitation frequency) per point: plus-port clicks over shots."""
    return [
        (float(t.grid_value), t.register_clicks(register)["plus_port"] / t.shots) for t in tables
    ]


def pooled_eigenbasis_visibility(tables: Sequence[CountsTable]) -> tuple[float, float]:
    """Parallel/cross contrast pooled over all scan points, with binomial error."""
    par = sum(
        t.count("plus_port", "plus_port") + t.count("minus_port", "minus_port") for t in tables
    )
    cross = sum(
        t.count("plus_port", "minus_port") + t.count("minus_port", "plus_port") for t in tables
    )
    total = par + cross
    if total == 0:
        raise FitError("no coincidences in eigenbasis tables")
    v = (par - cross) / total
    return float(v), float(math.sqrt(max(1.0 - v * v, 0.0) / total))
