"""Analyzer, loss and detector models mapping states to click probabilities.

The unbalanced interferometer that converts time bins into a measurement
basis is absorbed into an analyzer setting (theta, phi): the kept port
projects onto cos(theta)|E> + e^{i phi} sin(theta)|L>, the other port onto
the orthogonal vector, and vacuum is a third outcome. Transmission losses
are amplitude damping toward vacuum; detector dark counts promote no-click
outcomes to a random port. Afterpulsing is a sampling-time effect (it
couples consecutive detection windows of a temporally multiplexed detector
pair) and is only annotated here via the ``multiplexed`` flag.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Iterable

import numpy as np

from .errors import ConfigurationError, InvalidStateError
from .hilbert import (
    DIM,
    AtomLevel,
    DensityOperator,
    KrausChannel,
    PhotonMode,
    apply_channel,
    basis_index,
)

OUTCOMES = ("plus_port", "minus_port", "no_click")
N_JOINT_OUTCOMES = 9

PLUS, MINUS, NO_CLICK = 0, 1, 2


def joint_outcome_index(a: int, b: int) -> int:
    """Flatten (register-1 outcome, register-2 outcome) to [0, 9)."""
    return 3 * a + b


@dataclass(frozen=True)
class AnalyzerSetting:
    """Measurement basis for one photon register.

    theta is the basis angle (0 measures E/L directly, pi/4 the balanced
    superposition), phi the analysis phase on the late mode. phi is reduced
    modulo 2*pi so phase scans can sweep arbitrary grids.
    """

    theta: float
    phi: float = 0.0
    register: int = 1

    def __post_init__(self):
        if not 0.0 <= self.theta <= math.pi / 2.0 + 1e-12:
            raise ConfigurationError(f"theta must be in [0, pi/2], got {self.theta}")
        if self.register not in (1, 2):
            raise ConfigurationError(f"register must be 1 or 2, got {self.register}")
        object.__setattr__(self, "phi", float(self.phi) % (2.0 * math.pi))

    def with_phi(self, phi: float) -> "AnalyzerSetting":
        return AnalyzerSetting(self.theta, phi, self.register)


@dataclass(frozen=True)
class LossChain:
    """Named transmission factors for one photon path.

    ``retrieval`` is bookkeeping only: the retrieval step inside the protocol
    already applies it, so :meth:`transmission` excludes it. ``switch`` is
    the routing element needed when the two photons go to separate detector
    pairs; it stays 1 for the temporally multiplexed arrangement.
    """

    preparation: float = 1.0
    retrieval: float = 1.0
    fiber_coupling: float = 1.0
    aom_deflection: float = 1.0
    mz_transmission: float = 1.0
    detector_efficiency: float = 1.0
    switch: float = 1.0

    def __post_init__(self):
        for name, value in self.factors().items():
            if not 0.0 <= value <= 1.0:
                raise ConfigurationError(f"loss factor {name} must be in [0,1], got {value}")

    def factors(self) -> dict[str, float]:
        return {
            "preparation": self.preparation,
            "retrieval": self.retrieval,
            "fiber_coupling": self.fiber_coupling,
            "aom_deflection": self.aom_deflection,
            "mz_transmission": self.mz_transmission,
            "detector_efficiency": self.detector_efficiency,
            "switch": self.switch,
        }

    def transmission(self) -> float:
        """Product of every factor except retrieval."""
        total = 1.0
        for name, value in self.factors().items():
            if name != "retrieval":
                total *= value
        return total

    def end_to_end(self) -> float:
        """Full budget including retrieval; the expected click probability."""
        return self.transmission() * self.retrieval


@dataclass(frozen=True)
class DetectorModel:
    """Detector imperfections shared by all four single-photon detectors.

    dark_count_prob: per detection window; a no-click outcome converts into
        a click on a uniformly random port with this probability.
    afterpulse_prob: probability that a click in one temporal window causes
        a spurious click in the next window of the same detector. Only the
        multiplexed (two-detector) arrangement has consecutive windows on
        the same detector, so afterpulsing is inert when multiplexed=False.
    swap_ports: relabel plus/minus per register; the experimental port
        convention is not fixed by the physics, so it is exposed as a flag.
    """

    dark_count_prob: float = 0.0
    afterpulse_prob: float = 0.0
    multiplexed: bool = True
    swap_ports: tuple[bool, bool] = (False, False)
    detectors: tuple[str, ...] = ("SPD1", "SPD2", "SPD3", "SPD4")

    def __post_init__(self):
        if not 0.0 <= self.dark_count_prob <= 1.0:
            raise ConfigurationError("dark_count_prob must be in [0,1]")
        if not 0.0 <= self.afterpulse_prob <= 1.0:
            raise ConfigurationError("afterpulse_prob must be in [0,1]")
        if len(self.swap_ports) != 2:
            raise ConfigurationError("swap_ports needs one flag per register")


@dataclass(frozen=True)
class OutcomeDistribution:
    """Joint click probabilities for one settings pair.

    probs is indexed by 3*a + b with outcomes ordered (plus_port,
    minus_port, no_click) for register 1 (a) and register 2 (b). Dark
    counts are already folded in; afterpulsing is applied at sampling time
    using the annotated ``multiplexed`` flag.
    """

    probs: np.ndarray
    settings: tuple[AnalyzerSetting, AnalyzerSetting]
    multiplexed: bool = True

    def __post_init__(self):
        probs = np.asarray(self.probs, dtype=float).reshape(N_JOINT_OUTCOMES)
        object.__setattr__(self, "probs", probs)
        if np.any(probs < -1e-12):
            raise InvalidStateError(f"negative outcome probability: {probs.min():.3e}")
        total = float(probs.sum())
        if abs(total - 1.0) > 1e-9:
            raise InvalidStateError(f"outcome probabilities sum to {total!r}")

    def prob(self, a: str, b: str) -> float:
        return float(self.probs[joint_outcome_index(OUTCOMES.index(a), OUTCOMES.index(b))])

    def as_dict(self) -> dict[tuple[str, str], float]:
        return {
            (OUTCOMES[a], OUTCOMES[b]): float(self.probs[joint_outcome_index(a, b)])
            for a in range(3)
            for b in range(3)
        }


def measurement_effects(setting: AnalyzerSetting) -> list[np.ndarray]:
    """Three positive effects on one register: kept port, other port, vacuum.

    They sum to the identity on the 3-dimensional register space.
    """
    c, s = math.cos(setting.theta), math.sin(setting.theta)
    ph = np.exp(1j * setting.phi)
    v_plus = np.array([0.0, c, ph * s], dtype=complex)
    v_minus = np.array([0.0, s, -ph * c], dtype=complex)
    vac = np.zeros((3, 3), dtype=complex)
    vac[int(PhotonMode.VAC), int(PhotonMode.VAC)] = 1.0
    return [np.outer(v_plus, v_plus.conj()), np.outer(v_minus, v_minus.conj()), vac]


def _loss_channel(transmission: float, register: int) -> KrausChannel:
    """Amplitude damping of E and L toward vacuum on one register."""
    root_t = math.sqrt(transmission)
    root_loss = math.sqrt(1.0 - transmission)
    k0 = np.eye(DIM, dtype=complex)
    k_e = np.zeros((DIM, DIM), dtype=complex)
    k_l = np.zeros((DIM, DIM), dtype=complex)
    for atom in AtomLevel:
        for p_other in PhotonMode:
            for mode, sink in ((PhotonMode.E, k_e), (PhotonMode.L, k_l)):
                if register == 1:
                    i_mode = basis_index(atom, mode, p_other)
                    i_vac = basis_index(atom, PhotonMode.VAC, p_other)
                else:
                    i_mode = basis_index(atom, p_other, mode)
                    i_vac = basis_index(atom, p_other, PhotonMode.VAC)
                k0[i_mode, i_mode] = root_t
                sink[i_vac, i_mode] = root_loss
    return KrausChannel((k0, k_e, k_l))


def apply_losses(rho: DensityOperator, chain: LossChain, register: int) -> DensityOperator:
    """Damp the register's photon amplitude by the chain's transmission."""
    if register not in (1, 2):
        raise ConfigurationError(f"register must be 1 or 2, got {register}")
    t = chain.transmission()
    if t == 1.0:
        return rho
    return apply_channel(rho, _loss_channel(t, register))


def _dark_transition(dark_count_prob: float) -> np.ndarray:
    """Row-stochastic outcome transition for one register."""
    d = dark_count_prob
    return np.array(
        [
            [1.0, 0.0, 0.0],
            [0.0, 1.0, 0.0],
            [d / 2.0, d / 2.0, 1.0 - d],
        ]
    )


def joint_click_distribution(
    rho: DensityOperator,
    s1: AnalyzerSetting,
    s2: AnalyzerSetting,
    det: DetectorModel,
) -> OutcomeDistribution:
    """Born-rule joint outcome probabilities, perturbed by dark counts.

    The two settings must address distinct registers; losses are expected to
    have been applied already.
    """
    if s1.register == s2.register:
        raise ConfigurationError("settings must address distinct registers")
    setting_by_register = {s1.register: s1, s2.register: s2}
    eff1 = measurement_effects(setting_by_register[1])
    eff2 = measurement_effects(setting_by_register[2])

    tensor = rho.mat.reshape(4, 3, 3, 4, 3, 3)
    table = np.empty((3, 3), dtype=float)
    for a in range(3):
        for b in range(3):
            val = np.einsum("aijakl,ki,lj->", tensor, eff1[a], eff2[b])
            table[a, b] = max(float(val.real), 0.0)

    trans = _dark_transition(det.dark_count_prob)
    table = trans.T @ table @ trans

    if det.swap_ports[0]:
        table = table[[MINUS, PLUS, NO_CLICK], :]
    if det.swap_ports[1]:
        table = table[:, [MINUS, PLUS, NO_CLICK]]

    table = table / table.sum()
    return OutcomeDistribution(
        table.reshape(N_JOINT_OUTCOMES),
        (setting_by_register[1], setting_by_register[2]),
        multiplexed=det.multiplexed,
    )


def register_marginal(dist: OutcomeDistribution, register: int) -> np.ndarray:
    """Outcome probabilities (plus, minus, no_click) for one register."""
    table = dist.probs.reshape(3, 3)
    return table.sum(axis=1) if register == 1 else table.sum(axis=0)


def completeness_defect(setting: AnalyzerSetting) -> float:
    """Max deviation of the summed effects from the register identity."""
    total = sum(measurement_effects(setting))
    return float(np.max(np.abs(total - np.eye(3))))
