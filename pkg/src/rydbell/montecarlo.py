"""Shot-by-shot sampling of click records and reproducible counting.

Randomness is counter based: every uniform is a pure function of
(master_seed, point index, shot index, draw index), so identical
configurations give byte-identical counts no matter how the shot range is
chunked across workers. Two interchangeable kernels implement the per-shot
loop; the compiled one is preferred and the numpy one is the fallback.
"""

from __future__ import annotations

import math
import os
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, replace
from typing import Iterable, Sequence

import numpy as np

from . import _sampler_py
from .errors import ConfigurationError
from .optics import (
    OUTCOMES,
    AnalyzerSetting,
    DetectorModel,
    LossChain,
    OutcomeDistribution,
    apply_losses,
    joint_click_distribution,
)
from .protocol import ProtocolConfig, run_protocol

_FORCED_BACKEND = os.environ.get("RYDBELL_SAMPLER", "").strip().lower()
if _FORCED_BACKEND in ("python", "numpy"):
    _kernel = _sampler_py
    SAMPLER_BACKEND = "python"
else:
    try:
        from . import _sampler_cy as _kernel  # type: ignore[no-redef]

        SAMPLER_BACKEND = "cython"
    except ImportError:
        if _FORCED_BACKEND == "cython":
            raise
        _kernel = _sampler_py
        SAMPLER_BACKEND = "python"

_BLOCK_SHOTS = 1 << 20

SCAN_VARIABLES = ("analyzer_phase", "pulse_area", "pulse_duration")


@dataclass(frozen=True)
class SeedPolicy:
    """Master seed plus the documented substream derivation.

    Substreams: uniform(master, point, shot, draw) as implemented by the
    sampling kernels (SplitMix64 finalizer chain over salted indices). The
    derivation is stateless, so results do not depend on execution order or
    on how shots are distributed over workers.
    """

    master_seed: int

    def __post_init__(self):
        if not 0 <= self.master_seed < 2**64:
            raise ConfigurationError("master_seed must fit in 64 bits")


@dataclass(frozen=True)
class ShotRecord:
    """One sampled shot, for inspection and debugging at small shot counts."""

    shot: int
    outcome: tuple[str, str]
    afterpulse: bool


@dataclass(frozen=True)
class CountsTable:
    """Coincidence counts for one settings pair at one scan point."""

    settings: tuple[AnalyzerSetting, AnalyzerSetting]
    counts: dict[tuple[str, str], int]
    shots: int
    point_index: int = 0
    grid_value: float | None = None
    afterpulse_clicks: int = 0

    def __post_init__(self):
        total = sum(self.counts.values())
        if total != self.shots:
            raise ConfigurationError(f"counts sum to {total}, expected {self.shots} shots")

    def count(self, a: str, b: str) -> int:
        return self.counts.get((a, b), 0)

    def coincidences(self) -> dict[tuple[str, str], int]:
        """Counts restricted to shots where both registers clicked."""
        return {
            (a, b): n
            for (a, b), n in self.counts.items()
            if a != "no_click" and b != "no_click"
        }

    def register_clicks(self, register: int) -> dict[str, int]:
        out = {label: 0 for label in OUTCOMES}
        for (a, b), n in self.counts.items():
            out[a if register == 1 else b] += n
        return out

    def canonical_rows(self) -> list[tuple[str, str, int]]:
        return sorted((a, b, n) for (a, b), n in self.counts.items())


def _counts_dict(counts9: np.ndarray) -> dict[tuple[str, str], int]:
    return {
        (OUTCOMES[a], OUTCOMES[b]): int(counts9[3 * a + b]) for a in range(3) for b in range(3)
    }


def _cumulative(dist: OutcomeDistribution) -> np.ndarray:
    cum = np.cumsum(dist.probs)
    cum[-1] = 1.0  # guard against rounding so every uniform lands in a bin
    return cum


def sample_counts(
    dist: OutcomeDistribution,
    shots: int,
    det: DetectorModel,
    seeds: SeedPolicy,
    point_index: int = 0,
    *,
    workers: int = 1,
    grid_value: float | None = None,
) -> CountsTable:
    """Multinomial sampling of ``shots`` outcomes with afterpulse dynamics.

    A click in the register-1 window triggers a spurious click in the
    register-2 window of the same detector with probability afterpulse_prob,
    in the multiplexed arrangement only and only if that window is empty.
    """
    if shots < 1:
        raise ConfigurationError("shots must be >= 1")
    if workers < 1:
        raise ConfigurationError("workers must be >= 1")
    cum = _cumulative(dist)
    ap = det.afterpulse_prob

    def run_range(start: int, n: int) -> tuple[np.ndarray, int]:
        counts = np.zeros(9, dtype=np.int64)
        n_ap = 0
        offset = start
        remaining = n
        while remaining > 0:
            step = min(_BLOCK_SHOTS, remaining)
            n_ap += _kernel.sample_block(
                cum, seeds.master_seed, point_index, offset, step, dist.multiplexed, ap, counts
            )
            offset += step
            remaining -= step
        return counts, n_ap

    if workers == 1:
        counts, n_ap = run_range(0, shots)
    else:
        per = -(-shots // workers)
        ranges = [(i * per, min(per, shots - i * per)) for i in range(workers) if i * per < shots]
        with ThreadPoolExecutor(max_workers=workers) as pool:
            parts = list(pool.map(lambda r: run_range(*r), ranges))
        counts = np.zeros(9, dtype=np.int64)
        n_ap = 0
        for part_counts, part_ap in parts:  # deterministic reduction in range order
            counts += part_counts
            n_ap += part_ap
    return CountsTable(
        dist.settings, _counts_dict(counts), shots, point_index, grid_value, n_ap
    )


def sample_records(
    dist: OutcomeDistribution,
    shots: int,
    det: DetectorModel,
    seeds: SeedPolicy,
    point_index: int = 0,
) -> list[ShotRecord]:
    """Per-shot records; same draws as :func:`sample_counts`."""
    if shots < 1:
        raise ConfigurationError("shots must be >= 1")
    cum = _cumulative(dist)
    pkey = _sampler_py.point_key(seeds.master_seed, point_index)
    skeys = _sampler_py.shot_keys(pkey, 0, shots)
    u0 = _sampler_py.uniforms(skeys, 0)
    outcome = np.minimum(np.searchsorted(cum, u0, side="right"), 8)
    records = []
    for i in range(shots):
        a, b = divmod(int(outcome[i]), 3)
        fired = False
        if dist.multiplexed and det.afterpulse_prob > 0.0 and a < 2 and b == 2:
            u1 = float(_sampler_py.uniforms(skeys[i : i + 1], 1)[0])
            if u1 < det.afterpulse_prob:
                b = a
                fired = True
        records.append(ShotRecord(i, (OUTCOMES[a], OUTCOMES[b]), fired))
    return records


def expected_distribution(dist: OutcomeDistribution, det: DetectorModel) -> np.ndarray:
    """Exact per-shot outcome probabilities including afterpulse dynamics."""
    probs = dist.probs.copy()
    if dist.multiplexed and det.afterpulse_prob > 0.0:
        for a in (0, 1):
            moved = probs[3 * a + 2] * det.afterpulse_prob
            probs[3 * a + 2] -= moved
            probs[4 * a] += moved
    return probs


def _ordered_settings(
    settings: Sequence[AnalyzerSetting],
) -> tuple[AnalyzerSetting, AnalyzerSetting]:
    if len(settings) != 2 or {s.register for s in settings} != {1, 2}:
        raise ConfigurationError("need one analyzer setting per register")
    by_reg = {s.register: s for s in settings}
    return by_reg[1], by_reg[2]


def scan(
    config: ProtocolConfig,
    scan_variable: str,
    grid: Iterable[float],
    shots_per_point: int,
    seeds: SeedPolicy,
    *,
    settings: Sequence[AnalyzerSetting],
    loss_chain: LossChain,
    detector: DetectorModel,
    scan_register: int = 2,
    stream_offset: int = 0,
    workers: int = 1,
) -> list[CountsTable]:
    """One CountsTable per grid point from independent substreams.

    Pipeline per point: run_protocol -> apply_losses -> joint_click
    distribution -> sample_counts. Analyzer-phase scans reuse the protocol
    state across points; pulse scans rebuild it and require the rabi_probe
    variant.
    """
    values = [float(v) for v in grid]
    if not values:
        raise ConfigurationError("scan grid must be nonempty")
    if scan_variable not in SCAN_VARIABLES:
        raise ConfigurationError(f"unknown scan variable {scan_variable!r}; expected {SCAN_VARIABLES}")
    s1, s2 = _ordered_settings(settings)

    tables = []
    if scan_variable == "analyzer_phase":
        rho = run_protocol(config)
        rho = apply_losses(rho, loss_chain, 1)
        rho = apply_losses(rho, loss_chain, 2)
        for i, value in enumerate(values):
            si1 = s1.with_phi(value) if scan_register == 1 else s1
            si2 = s2.with_phi(value) if scan_register == 2 else s2
            dist = joint_click_distribution(rho, si1, si2, detector)
            tables.append(
                sample_counts(
                    dist, shots_per_point, detector, seeds, stream_offset + i,
                    workers=workers, grid_value=value,
                )
            )
        return tables

    if config.variant != "rabi_probe":
        raise ConfigurationError(
            f"scan over {scan_variable!r} requires the rabi_probe protocol variant"
        )
    pulse = config.prepare[0]
    two_pi = 2.0 * math.pi
    for i, value in enumerate(values):
        if scan_variable == "pulse_duration":
            area = math.pi * value / config.noise.atom.pi_time_ns(pulse.target)
        else:
            area = value
        if two_pi < area <= two_pi + 1e-9:  # absorb float drift at the top of a grid
            area = two_pi
        cfg = ProtocolConfig(
            "rabi_probe",
            (replace(pulse, area=area),),
            (),
            config.readout,
            config.noise,
        )
        rho = run_protocol(cfg)
        rho = apply_losses(rho, loss_chain, 1)
        rho = apply_losses(rho, loss_chain, 2)
        dist = joint_click_distribution(rho, s1, s2, detector)
        tables.append(
            sample_counts(
                dist, shots_per_point, detector, seeds, stream_offset + i,
                workers=workers, grid_value=value,
            )
        )
    return tables
