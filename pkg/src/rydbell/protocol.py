"""Three-phase protocol execution: prepare, retrieve-and-patch, readout.

A protocol run is a sequence of collective pulses and retrieval channels
applied to the 36-dimensional joint state, starting from |G, vac, vac>.
Collective pulses rotate the {|G>, |R_target>} subspace while the blockade
keeps the other Rydberg level fixed (up to an optional leakage channel into
the sink level D). Retrievals convert a collective excitation into a photon
in a chosen (register, temporal mode) slot with finite efficiency; failed
retrievals leave the atom in G with the photon lost outside the collected
mode, so a subsequent patching pulse re-creates the excitation.

Rotation convention for a pulse of area theta and phase phi on target level R:

    |G> -> cos(theta/2)|G> + e^{i phi} sin(theta/2)|R>
    |R> -> -e^{-i phi} sin(theta/2)|G> + cos(theta/2)|R>

Only phase differences are observable; the relative phase of the two-branch
entangled state equals the summed pulse phases of the r2 branch minus those
of the r1 branch (see :func:`entangled_phase`).
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Mapping, Sequence, Union

import numpy as np

from .errors import ConfigurationError
from .hilbert import (
    DIM,
    DIM_PHOTON,
    AtomLevel,
    DensityOperator,
    KrausChannel,
    PhotonMode,
    apply_channel,
    basis_index,
    basis_state,
    pure_to_density,
    unitary_channel,
)

_TWO_PI = 2.0 * math.pi
_LEVEL_BY_NAME = {"r1": AtomLevel.R1, "r2": AtomLevel.R2}
_MODE_BY_NAME = {"E": PhotonMode.E, "L": PhotonMode.L}

DEFAULT_PI_TIME_R1_NS = 92.95
DEFAULT_PI_TIME_R2_NS = 92.18


@dataclass(frozen=True)
class PulseSpec:
    """Collective pulse coupling |G> to one Rydberg level."""

    target: str  # "r1" | "r2"
    area: float  # radians, [0, 2*pi]
    phase: float = 0.0  # radians, [0, 2*pi)
    label: str = ""

    def __post_init__(self):
        if self.target not in _LEVEL_BY_NAME:
            raise ConfigurationError(f"pulse target must be 'r1' or 'r2', got {self.target!r}")
        if not 0.0 <= self.area <= _TWO_PI:
            raise ConfigurationError(f"pulse area must be in [0, 2*pi], got {self.area}")
        if not 0.0 <= self.phase < _TWO_PI:
            raise ConfigurationError(f"pulse phase must be in [0, 2*pi), got {self.phase}")


@dataclass(frozen=True)
class RetrievalSpec:
    """Conversion of one collective excitation into a photon slot."""

    source_level: str  # "r1" | "r2"
    photon_register: int  # 1 | 2
    temporal_mode: str  # "E" | "L"
    efficiency: float = 1.0

    def __post_init__(self):
        if self.source_level not in _LEVEL_BY_NAME:
            raise ConfigurationError(f"source level must be 'r1' or 'r2', got {self.source_level!r}")
        if self.photon_register not in (1, 2):
            raise ConfigurationError(f"photon register must be 1 or 2, got {self.photon_register}")
        if self.temporal_mode not in _MODE_BY_NAME:
            raise ConfigurationError(f"temporal mode must be 'E' or 'L', got {self.temporal_mode!r}")
        if not 0.0 <= self.efficiency <= 1.0:
            raise ConfigurationError(f"retrieval efficiency must be in [0,1], got {self.efficiency}")

    @property
    def slot(self) -> tuple[int, str]:
        return (self.photon_register, self.temporal_mode)


Step = Union[PulseSpec, RetrievalSpec]


@dataclass(frozen=True)
class AtomMetadata:
    """Ensemble bookkeeping; none of these enter the effective dynamics."""

    n_atoms: int = 1000
    pi_time_r1_ns: float = DEFAULT_PI_TIME_R1_NS
    pi_time_r2_ns: float = DEFAULT_PI_TIME_R2_NS

    def __post_init__(self):
        if self.pi_time_r1_ns <= 0 or self.pi_time_r2_ns <= 0:
            raise ConfigurationError("pi pulse times must be positive")

    def pi_time_ns(self, target: str) -> float:
        return self.pi_time_r1_ns if target == "r1" else self.pi_time_r2_ns


@dataclass(frozen=True)
class NoiseConfig:
    """Imperfection knobs applied during protocol execution.

    blockade_leakage: probability per blocked pulse (area >= pi/2) that the
        spectator excitation leaks into the sink level D.
    rydberg_dephasing: per-step phase damping strength in [0, 1]; each step
        multiplies dephasing-sensitive coherences by sqrt(1 - gamma).
    pulse_area_error: multiplicative fractional error on every pulse area.
    """

    blockade_leakage: float = 0.0
    rydberg_dephasing: float = 0.0
    pulse_area_error: float = 0.0
    atom: AtomMetadata = field(default_factory=AtomMetadata)

    def __post_init__(self):
        if not 0.0 <= self.blockade_leakage <= 1.0:
            raise ConfigurationError("blockade_leakage must be in [0,1]")
        if not 0.0 <= self.rydberg_dephasing <= 1.0:
            raise ConfigurationError("rydberg_dephasing must be in [0,1]")
        if not -0.5 <= self.pulse_area_error <= 0.5:
            raise ConfigurationError("pulse_area_error must be a small fraction in [-0.5, 0.5]")


IDEAL_NOISE = NoiseConfig()

VARIANTS = ("full", "skip_entangle_phase", "rabi_probe")


@dataclass(frozen=True)
class ProtocolConfig:
    """Declarative step timeline for one protocol variant.

    The full variant must contain exactly the canonical sequence
    prepare [pi/2 on r1, pi on r2],
    entangle [retrieve r1 -> (1,E), pi on r1, retrieve r2 -> (1,L), pi on r2],
    readout [retrieve r1 -> (2,E), retrieve r2 -> (2,L)];
    pulse phases and retrieval efficiencies are free. The skip variant drops
    the entangle phase; the rabi_probe variant is a single excitation pulse
    followed by a single readout retrieval.
    """

    variant: str = "full"
    prepare: tuple[Step, ...] = ()
    entangle: tuple[Step, ...] = ()
    readout: tuple[Step, ...] = ()
    noise: NoiseConfig = field(default_factory=NoiseConfig)

    def __post_init__(self):
        if self.variant not in VARIANTS:
            raise ConfigurationError(f"unknown variant {self.variant!r}; expected one of {VARIANTS}")
        for s in self.prepare:
            if isinstance(s, RetrievalSpec):
                raise ConfigurationError("retrieval before preparation: prepare phase must contain only pulses")
        slots = [s.slot for s in self.steps() if isinstance(s, RetrievalSpec)]
        if len(slots) != len(set(slots)):
            raise ConfigurationError(f"photon (register, mode) slot reused: {slots}")
        if self.variant == "full":
            self._require_shape(
                self.prepare, [("pulse", "r1", math.pi / 2), ("pulse", "r2", math.pi)], "prepare"
            )
            self._require_shape(
                self.entangle,
                [
                    ("retrieve", "r1", (1, "E")),
                    ("pulse", "r1", math.pi),
                    ("retrieve", "r2", (1, "L")),
                    ("pulse", "r2", math.pi),
                ],
                "entangle",
            )
            self._require_shape(
                self.readout, [("retrieve", "r1", (2, "E")), ("retrieve", "r2", (2, "L"))], "readout"
            )
        elif self.variant == "skip_entangle_phase":
            self._require_shape(
                self.prepare, [("pulse", "r1", math.pi / 2), ("pulse", "r2", math.pi)], "prepare"
            )
            if self.entangle:
                raise ConfigurationError("skip_entangle_phase variant must have an empty entangle phase")
            self._require_shape(
                self.readout, [("retrieve", "r1", (2, "E")), ("retrieve", "r2", (2, "L"))], "readout"
            )
        else:  # rabi_probe
            if len(self.prepare) != 1 or not isinstance(self.prepare[0], PulseSpec):
                raise ConfigurationError("rabi_probe variant needs exactly one preparation pulse")
            if self.entangle:
                raise ConfigurationError("rabi_probe variant must have an empty entangle phase")
            if len(self.readout) != 1 or not isinstance(self.readout[0], RetrievalSpec):
                raise ConfigurationError("rabi_probe variant needs exactly one readout retrieval")
            if self.readout[0].source_level != self.prepare[0].target:
                raise ConfigurationError("rabi_probe readout must retrieve the pulsed level")

    @staticmethod
    def _require_shape(steps, expected, phase_name):
        if len(steps) != len(expected):
            raise ConfigurationError(
                f"{phase_name} phase must have {len(expected)} steps, got {len(steps)}"
            )
        for step, (kind, target, detail) in zip(steps, expected):
            if kind == "pulse":
                if not isinstance(step, PulseSpec) or step.target != target or abs(step.area - detail) > 1e-9:
                    raise ConfigurationError(
                        f"{phase_name} phase expects a {detail:.4f}-area pulse on {target}, got {step}"
                    )
            else:
                if (
                    not isinstance(step, RetrievalSpec)
                    or step.source_level != target
                    or step.slot != detail
                ):
                    raise ConfigurationError(
                        f"{phase_name} phase expects retrieval {target} -> {detail}, got {step}"
                    )

    def steps(self) -> tuple[Step, ...]:
        return self.prepare + self.entangle + self.readout

    def phase_steps(self, phase: str) -> tuple[Step, ...]:
        try:
            return {"prepare": self.prepare, "entangle": self.entangle, "readout": self.readout}[phase]
        except KeyError:
            raise ConfigurationError(f"unknown phase {phase!r}") from None

    @classmethod
    def standard(
        cls,
        variant: str = "full",
        *,
        retrieval_efficiency: float = 1.0,
        readout_efficiency: float | None = None,
        pulse_phases: Mapping[str, float] | None = None,
        noise: NoiseConfig | None = None,
    ) -> "ProtocolConfig":
        """Canonical step sequence with configurable phases and efficiencies."""
        phases = {"prepare_r1": 0.0, "prepare_r2": 0.0, "patch_r1": 0.0, "patch_r2": 0.0}
        for key, value in (pulse_phases or {}).items():
            if key not in phases:
                raise ConfigurationError(f"unknown pulse phase key {key!r}")
            phases[key] = value % _TWO_PI
        eta_mid = retrieval_efficiency
        eta_out = retrieval_efficiency if readout_efficiency is None else readout_efficiency
        prepare = (
            PulseSpec("r1", math.pi / 2, phases["prepare_r1"], "prepare half excitation"),
            PulseSpec("r2", math.pi, phases["prepare_r2"], "prepare patch"),
        )
        entangle = (
            RetrievalSpec("r1", 1, "E", eta_mid),
            PulseSpec("r1", math.pi, phases["patch_r1"], "patch r1"),
            RetrievalSpec("r2", 1, "L", eta_mid),
            PulseSpec("r2", math.pi, phases["patch_r2"], "patch r2"),
        )
        readout = (
            RetrievalSpec("r1", 2, "E", eta_out),
            RetrievalSpec("r2", 2, "L", eta_out),
        )
        if variant == "skip_entangle_phase":
            entangle = ()
        elif variant != "full":
            raise ConfigurationError(f"standard() builds 'full' or 'skip_entangle_phase', not {variant!r}")
        return cls(variant, prepare, entangle, readout, noise or NoiseConfig())

    @classmethod
    def rabi_probe(
        cls,
        target: str = "r1",
        area: float = math.pi,
        *,
        phase: float = 0.0,
        efficiency: float = 1.0,
        noise: NoiseConfig | None = None,
    ) -> "ProtocolConfig":
        """Single excitation pulse followed by retrieval into register 2, mode E."""
        return cls(
            "rabi_probe",
            (PulseSpec(target, area, phase, "probe pulse"),),
            (),
            (RetrievalSpec(target, 2, "E", efficiency),),
            noise or NoiseConfig(),
        )


def entangled_phase(config: ProtocolConfig) -> float:
    """Relative phase of the r2/late branch against the r1/early branch.

    Bookkeeping rule: sum the phases of all pulses targeting r2, subtract the
    phases of all pulses targeting r1. For the canonical sequences this gives
    the phase of the |L...> component of the final two-branch state.
    """
    total = 0.0
    for step in config.steps():
        if isinstance(step, PulseSpec):
            total += step.phase if step.target == "r2" else -step.phase
    return total % _TWO_PI


def _pulse_unitary(target: AtomLevel, theta: float, phi: float) -> np.ndarray:
    u = np.eye(DIM, dtype=complex)
    c = math.cos(theta / 2.0)
    s = math.sin(theta / 2.0)
    for p1 in PhotonMode:
        for p2 in PhotonMode:
            ig = basis_index(AtomLevel.G, p1, p2)
            ir = basis_index(target, p1, p2)
            u[ig, ig] = c
            u[ir, ig] = np.exp(1j * phi) * s
            u[ig, ir] = -np.exp(-1j * phi) * s
            u[ir, ir] = c
    return u


def _leakage_channel(blocked: AtomLevel, eps: float) -> KrausChannel:
    """Amplitude damping of the blocked level into the sink D."""
    k0 = np.eye(DIM, dtype=complex)
    k1 = np.zeros((DIM, DIM), dtype=complex)
    for p1 in PhotonMode:
        for p2 in PhotonMode:
            ib = basis_index(blocked, p1, p2)
            idd = basis_index(AtomLevel.D, p1, p2)
            k0[ib, ib] = math.sqrt(1.0 - eps)
            k1[idd, ib] = math.sqrt(eps)
    return KrausChannel((k0, k1))


def collective_pulse(rho: DensityOperator, pulse: PulseSpec, noise: NoiseConfig) -> DensityOperator:
    """Rotate {|G>, |R_target>}; the spectator Rydberg level is blockaded.

    The effective area is scaled by (1 + pulse_area_error). For pulses with
    effective area >= pi/2 the spectator population leaks into D with
    probability blockade_leakage. D itself is always left invariant.
    """
    target = _LEVEL_BY_NAME[pulse.target]
    other = AtomLevel.R2 if target is AtomLevel.R1 else AtomLevel.R1
    theta = pulse.area * (1.0 + noise.pulse_area_error)
    out = apply_channel(rho, unitary_channel(_pulse_unitary(target, theta, pulse.phase)))
    if noise.blockade_leakage > 0.0 and theta >= math.pi / 2.0 - 1e-12:
        out = apply_channel(out, _leakage_channel(other, noise.blockade_leakage))
    return out


def retrieval_channel(spec: RetrievalSpec) -> KrausChannel:
    """Kraus pair for one retrieval.

    On the relevant (atom, register) factor with S = |source, vac> and
    target slot |G, mode>:

        K_succ = sqrt(eta) |G,mode><S|  + identity off the {S, |G,mode>} pair
        K_fail = sqrt(1-eta) |G,vac><S|

    The remaining terms (a beamsplitter-style completion on |G,mode>) only
    matter for inputs that already hold a photon in the target slot, which
    the slot precondition excludes; they are required for the Kraus set to
    be trace preserving on the whole space.
    """
    eta = spec.efficiency
    src = _LEVEL_BY_NAME[spec.source_level]
    mode = _MODE_BY_NAME[spec.temporal_mode]
    reg = spec.photon_register

    k_succ = np.eye(DIM, dtype=complex)
    k_fail = np.zeros((DIM, DIM), dtype=complex)
    for p_other in PhotonMode:
        if reg == 1:
            i_src = basis_index(src, PhotonMode.VAC, p_other)
            i_photon = basis_index(AtomLevel.G, mode, p_other)
            i_empty = basis_index(AtomLevel.G, PhotonMode.VAC, p_other)
        else:
            i_src = basis_index(src, p_other, PhotonMode.VAC)
            i_photon = basis_index(AtomLevel.G, p_other, mode)
            i_empty = basis_index(AtomLevel.G, p_other, PhotonMode.VAC)
        k_succ[i_src, i_src] = 0.0
        k_succ[i_photon, i_photon] = math.sqrt(1.0 - eta)
        k_succ[i_photon, i_src] = math.sqrt(eta)
        k_fail[i_empty, i_src] = math.sqrt(1.0 - eta)
        k_fail[i_empty, i_photon] = -math.sqrt(eta)
    return KrausChannel((k_succ, k_fail))


def _slot_population(rho: DensityOperator, register: int, mode: PhotonMode) -> float:
    idx = [
        basis_index(a, mode if register == 1 else p, p if register == 1 else mode)
        for a in AtomLevel
        for p in PhotonMode
    ]
    return rho.population(idx)


def retrieve(rho: DensityOperator, spec: RetrievalSpec) -> DensityOperator:
    """Apply one retrieval; the target slot must be unpopulated."""
    occupancy = _slot_population(rho, spec.photon_register, _MODE_BY_NAME[spec.temporal_mode])
    if occupancy > 1e-9:
        raise ConfigurationError(
            f"retrieval into occupied slot {spec.slot}: population {occupancy:.3e}"
        )
    return apply_channel(rho, retrieval_channel(spec))


def _dephasing_mask() -> np.ndarray:
    """Boolean matrix marking coherences damped by one dephasing step."""
    atoms = np.arange(DIM) // (DIM_PHOTON * DIM_PHOTON)
    p1 = (np.arange(DIM) // DIM_PHOTON) % DIM_PHOTON
    p2 = np.arange(DIM) % DIM_PHOTON

    def pair_sensitive(x, members):
        xin = np.isin(x, members)
        return (x[:, None] != x[None, :]) & xin[:, None] & xin[None, :]

    rydberg = pair_sensitive(atoms, (int(AtomLevel.R1), int(AtomLevel.R2)))
    temporal = (int(PhotonMode.E), int(PhotonMode.L))
    return rydberg | pair_sensitive(p1, temporal) | pair_sensitive(p2, temporal)


_DEPHASE_SENSITIVE = _dephasing_mask()


def dephase_step(rho: DensityOperator, gamma_step: float) -> DensityOperator:
    """Per-step phase damping of which-branch information.

    Multiplies every coherence between the two Rydberg levels, and between
    the E and L modes within each photon register, by sqrt(1 - gamma_step);
    diagonals are untouched. Branches differing in several of those slots
    still receive a single factor per step.
    """
    if not 0.0 <= gamma_step <= 1.0:
        raise ConfigurationError(f"gamma_step must be in [0,1], got {gamma_step}")
    if gamma_step == 0.0:
        return rho
    factor = math.sqrt(1.0 - gamma_step)
    mat = rho.mat.copy()
    mat[_DEPHASE_SENSITIVE] *= factor
    return DensityOperator(mat)


def apply_steps(rho: DensityOperator, steps: Sequence[Step], noise: NoiseConfig) -> DensityOperator:
    """Run pulses and retrievals in order, dephasing once after each step."""
    for step in steps:
        if isinstance(step, PulseSpec):
            rho = collective_pulse(rho, step, noise)
        elif isinstance(step, RetrievalSpec):
            rho = retrieve(rho, step)
        else:
            raise ConfigurationError(f"unknown step type {type(step).__name__}")
        if noise.rydberg_dephasing > 0.0:
            rho = dephase_step(rho, noise.rydberg_dephasing)
    return rho


def initial_state() -> DensityOperator:
    return pure_to_density(basis_state(AtomLevel.G, PhotonMode.VAC, PhotonMode.VAC))


def run_protocol(config: ProtocolConfig, halt_after_phase: int | None = None) -> DensityOperator:
    """Execute the configured protocol from |G, vac, vac>.

    ``halt_after_phase`` stops after phase 1 (prepare), 2 (entangle) or
    3 (readout); None runs everything.
    """
    if halt_after_phase not in (None, 1, 2, 3):
        raise ConfigurationError(f"halt_after_phase must be 1, 2, 3 or None, got {halt_after_phase}")
    rho = apply_steps(initial_state(), config.prepare, config.noise)
    if halt_after_phase == 1:
        return rho
    rho = apply_steps(rho, config.entangle, config.noise)
    if halt_after_phase == 2:
        return rho
    return apply_steps(rho, config.readout, config.noise)


def register_click_probability(rho: DensityOperator, register: int) -> float:
    """Probability that the given register holds a photon (E or L)."""
    total = 0.0
    for mode in (PhotonMode.E, PhotonMode.L):
        total += _slot_population(rho, register, mode)
    return total
