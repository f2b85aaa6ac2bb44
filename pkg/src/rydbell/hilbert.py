"""State and channel algebra for the composite system atom x photon1 x photon2.

The atom has four effective levels: G (no excitation), R1/R2 (one collective
excitation in either Rydberg level) and D (an absorbing error sink for
blockade-violation events; nothing is ever retrieved from D). Each photon
register holds one of three modes: vacuum, early (E) or late (L). Everything
lives in the fixed 4*3*3 = 36 dimensional space, dense complex128 throughout.

Basis ordering is atom-major and owned by :func:`basis_index`; every other
module goes through it so the flattening convention exists in exactly one
place.
"""

from __future__ import annotations

from dataclasses import dataclass
from enum import IntEnum
from typing import Iterable, Sequence

import numpy as np

from .errors import InvalidChannelError, InvalidStateError

DIM_ATOM = 4
DIM_PHOTON = 3
DIM = DIM_ATOM * DIM_PHOTON * DIM_PHOTON

# Numerical tolerances for double-precision dense algebra at dimension 36.
NORM_TOL = 1e-12
TRACE_TOL = 1e-10
HERMITICITY_TOL = 1e-10
EIGENVALUE_FLOOR = -1e-9
COMPLETENESS_TOL = 1e-10

SUBSYSTEMS = ("atom", "photon1", "photon2")
_SUBSYSTEM_DIMS = {"atom": DIM_ATOM, "photon1": DIM_PHOTON, "photon2": DIM_PHOTON}


class AtomLevel(IntEnum):
    G = 0
    R1 = 1
    R2 = 2
    D = 3


class PhotonMode(IntEnum):
    VAC = 0
    E = 1
    L = 2


def basis_index(atom: AtomLevel, p1: PhotonMode, p2: PhotonMode) -> int:
    """Flatten (atom, photon1, photon2) to an index in [0, 36), atom-major."""
    return int(atom) * DIM_PHOTON * DIM_PHOTON + int(p1) * DIM_PHOTON + int(p2)


def basis_labels(index: int) -> tuple[AtomLevel, PhotonMode, PhotonMode]:
    """Inverse of :func:`basis_index`."""
    atom, rest = divmod(index, DIM_PHOTON * DIM_PHOTON)
    p1, p2 = divmod(rest, DIM_PHOTON)
    return AtomLevel(atom), PhotonMode(p1), PhotonMode(p2)


@dataclass(frozen=True)
class PureState:
    """Normalized state vector over the 36-dimensional basis."""

    amps: np.ndarray

    def __post_init__(self):
        amps = np.asarray(self.amps, dtype=complex).reshape(DIM)
        object.__setattr__(self, "amps", amps)
        norm_sq = float(np.vdot(amps, amps).real)
        if abs(norm_sq - 1.0) > NORM_TOL:
            raise InvalidStateError(
                f"pure state norm^2 deviates from 1 by {abs(norm_sq - 1.0):.3e}"
            )

    @staticmethod
    def from_amplitudes(entries: dict[int, complex]) -> "PureState":
        """Build a state from a sparse {basis index: amplitude} map, normalizing."""
        amps = np.zeros(DIM, dtype=complex)
        for idx, a in entries.items():
            amps[idx] = a
        norm = np.linalg.norm(amps)
        if norm == 0:
            raise InvalidStateError("cannot normalize the zero vector")
        return PureState(amps / norm)


def basis_state(atom: AtomLevel, p1: PhotonMode, p2: PhotonMode) -> PureState:
    amps = np.zeros(DIM, dtype=complex)
    amps[basis_index(atom, p1, p2)] = 1.0
    return PureState(amps)


@dataclass(frozen=True)
class DensityOperator:
    """Trace-one positive operator on the 36-dimensional space.

    Hermiticity, unit trace and positivity (up to the numerical floor) are
    checked at construction, so a DensityOperator in hand is always valid.
    """

    mat: np.ndarray

    def __post_init__(self):
        mat = np.asarray(self.mat, dtype=complex).reshape(DIM, DIM)
        object.__setattr__(self, "mat", mat)
        herm_dev = float(np.max(np.abs(mat - mat.conj().T)))
        if herm_dev > HERMITICITY_TOL:
            raise InvalidStateError(f"not Hermitian: max deviation {herm_dev:.3e}")
        trace_dev = abs(complex(np.trace(mat)) - 1.0)
        if trace_dev > TRACE_TOL:
            raise InvalidStateError(f"trace deviates from 1 by {trace_dev:.3e}")
        min_eig = float(np.linalg.eigvalsh((mat + mat.conj().T) / 2.0)[0])
        if min_eig < EIGENVALUE_FLOOR:
            raise InvalidStateError(f"negative eigenvalue {min_eig:.3e}")

    def population(self, indices: Iterable[int]) -> float:
        """Total population on the given basis indices."""
        idx = list(indices)
        return float(np.sum(self.mat[idx, idx]).real)


@dataclass(frozen=True)
class KrausChannel:
    """Completely positive trace-preserving map given by its Kraus elements."""

    elements: tuple[np.ndarray, ...]

    def __post_init__(self):
        elems = tuple(np.asarray(k, dtype=complex).reshape(DIM, DIM) for k in self.elements)
        object.__setattr__(self, "elements", elems)
        total = sum(k.conj().T @ k for k in elems)
        dev = float(np.max(np.abs(total - np.eye(DIM))))
        if dev > COMPLETENESS_TOL:
            raise InvalidChannelError(
                f"Kraus completeness violated: max |sum K^dag K - I| = {dev:.3e}"
            )


def pure_to_density(psi: PureState) -> DensityOperator:
    """Rank-one projector |psi><psi|."""
    norm_sq = float(np.vdot(psi.amps, psi.amps).real)
    if abs(norm_sq - 1.0) > 1e-6:
        raise InvalidStateError(f"input not normalized: norm^2 = {norm_sq!r}")
    return DensityOperator(np.outer(psi.amps, psi.amps.conj()))


def apply_channel(rho: DensityOperator, ch: KrausChannel) -> DensityOperator:
    """Apply sum_i K_i rho K_i^dag."""
    out = np.zeros((DIM, DIM), dtype=complex)
    for k in ch.elements:
        out += k @ rho.mat @ k.conj().T
    return DensityOperator(out)


def state_fidelity(rho: DensityOperator, psi: PureState) -> float:
    """Overlap <psi|rho|psi>, clipped to [0, 1]."""
    f = float(np.real(np.vdot(psi.amps, rho.mat @ psi.amps)))
    return float(min(max(f, 0.0), 1.0))


def partial_trace(rho: DensityOperator, keep: Sequence[str]) -> np.ndarray:
    """Reduced density matrix over the kept subsystems.

    ``keep`` is a nonempty subset of {"atom", "photon1", "photon2"}; the
    result keeps the canonical (atom, photon1, photon2) ordering restricted
    to the kept subsystems and is returned as a plain square array.
    """
    keep_set = set(keep)
    if not keep_set:
        raise InvalidStateError("keep set must be nonempty")
    unknown = keep_set - set(SUBSYSTEMS)
    if unknown:
        raise InvalidStateError(f"unknown subsystems: {sorted(unknown)}")

    tensor = rho.mat.reshape(DIM_ATOM, DIM_PHOTON, DIM_PHOTON, DIM_ATOM, DIM_PHOTON, DIM_PHOTON)
    row = "abc"
    col = ""
    out_row, out_col = "", ""
    for i, s in enumerate(SUBSYSTEMS):
        if s in keep_set:
            col += row[i].upper()
            out_row += row[i]
            out_col += row[i].upper()
        else:
            col += row[i]  # repeated label sums the diagonal, i.e. traces
    reduced = np.einsum(f"{row}{col}->{out_row}{out_col}", tensor)
    dim = int(np.prod([_SUBSYSTEM_DIMS[s] for s in SUBSYSTEMS if s in keep_set]))
    return reduced.reshape(dim, dim)


def identity_channel() -> KrausChannel:
    return KrausChannel((np.eye(DIM, dtype=complex),))


def unitary_channel(u: np.ndarray) -> KrausChannel:
    return KrausChannel((np.asarray(u, dtype=complex),))


_PAULIS = (
    np.eye(2, dtype=complex),
    np.array([[0, 1], [1, 0]], dtype=complex),
    np.array([[0, -1j], [1j, 0]], dtype=complex),
    np.array([[1, 0], [0, -1]], dtype=complex),
)


def depolarizing_channel(p: float, subspace: Sequence[int]) -> KrausChannel:
    """Two-qubit depolarizing mix rho -> p*rho + (1-p)*I/4 on a 4-dim subspace.

    ``subspace`` lists four basis indices interpreted as the logical states
    |00>, |01>, |10>, |11|. States outside the subspace are left fixed (the
    identity completion rides on the identity-Pauli element).
    """
    if not 0.0 <= p <= 1.0:
        raise InvalidChannelError(f"depolarizing strength must be in [0,1], got {p}")
    if len(subspace) != 4 or len(set(subspace)) != 4:
        raise InvalidChannelError("subspace must list four distinct basis indices")
    idx = np.asarray(subspace, dtype=int)
    proj_out = np.eye(DIM, dtype=complex)
    proj_out[idx, idx] = 0.0

    elements = []
    for i, pa in enumerate(_PAULIS):
        for j, pb in enumerate(_PAULIS):
            is_identity = i == 0 and j == 0
            weight = p + (1.0 - p) / 16.0 if is_identity else (1.0 - p) / 16.0
            if weight == 0.0 and not is_identity:
                continue
            op = np.zeros((DIM, DIM), dtype=complex)
            op[np.ix_(idx, idx)] = np.sqrt(weight) * np.kron(pa, pb)
            if is_identity:
                op += proj_out
            elements.append(op)
    return KrausChannel(tuple(elements))


def dephasing_channel(level: AtomLevel) -> KrausChannel:
    """Full phase damping between one atomic level and the rest of the space."""
    proj = np.zeros((DIM, DIM), dtype=complex)
    for p1 in PhotonMode:
        for p2 in PhotonMode:
            i = basis_index(level, p1, p2)
            proj[i, i] = 1.0
    return KrausChannel((proj, np.eye(DIM, dtype=complex) - proj))


def atom_photon_bell_state(phase: float = 0.0) -> PureState:
    """(|R1,E,vac> + e^{i phase} |R2,L,vac>)/sqrt(2)."""
    return PureState.from_amplitudes(
        {
            basis_index(AtomLevel.R1, PhotonMode.E, PhotonMode.VAC): 1.0,
            basis_index(AtomLevel.R2, PhotonMode.L, PhotonMode.VAC): np.exp(1j * phase),
        }
    )


def photon_photon_bell_state(phase: float = 0.0) -> PureState:
    """(|G,E,E'> + e^{i phase} |G,L,L'>)/sqrt(2)."""
    return PureState.from_amplitudes(
        {
            basis_index(AtomLevel.G, PhotonMode.E, PhotonMode.E): 1.0,
            basis_index(AtomLevel.G, PhotonMode.L, PhotonMode.L): np.exp(1j * phase),
        }
    )


def single_photon_superposition(phase: float = 0.0, register: int = 2) -> PureState:
    """(|E> + e^{i phase} |L>)/sqrt(2) in one register, atom in G, other register empty."""
    if register == 1:
        a = basis_index(AtomLevel.G, PhotonMode.E, PhotonMode.VAC)
        b = basis_index(AtomLevel.G, PhotonMode.L, PhotonMode.VAC)
    elif register == 2:
        a = basis_index(AtomLevel.G, PhotonMode.VAC, PhotonMode.E)
        b = basis_index(AtomLevel.G, PhotonMode.VAC, PhotonMode.L)
    else:
        raise InvalidStateError(f"register must be 1 or 2, got {register}")
    return PureState.from_amplitudes({a: 1.0, b: np.exp(1j * phase)})
