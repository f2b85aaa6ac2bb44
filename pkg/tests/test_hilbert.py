import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from conftest import random_channel, random_density
from rydbell.errors import InvalidChannelError, InvalidStateError
from rydbell.hilbert import (
    DIM,
    AtomLevel,
    PhotonMode,
    PureState,
    apply_channel,
    atom_photon_bell_state,
    basis_index,
    basis_labels,
    basis_state,
    dephasing_channel,
    depolarizing_channel,
    identity_channel,
    partial_trace,
    photon_photon_bell_state,
    pure_to_density,
    state_fidelity,
)

A, P = AtomLevel, PhotonMode


class TestBasisIndex:
    def test_first_element(self):
        assert basis_index(A.G, P.VAC, P.VAC) == 0

    def test_documented_ordering(self):
        # atom-major: 1*9 + 1*3 + 0
        assert basis_index(A.R1, P.E, P.VAC) == 12

    def test_last_element(self):
        assert basis_index(A.D, P.L, P.L) == 35

    def test_bijective(self):
        seen = {basis_index(a, p1, p2) for a in A for p1 in P for p2 in P}
        assert seen == set(range(36))
        for i in range(36):
            assert basis_index(*basis_labels(i)) == i


class TestPureToDensity:
    def test_basis_state_projector(self):
        rho = pure_to_density(basis_state(A.G, P.VAC, P.VAC))
        expected = np.zeros((36, 36))
        expected[0, 0] = 1.0
        np.testing.assert_allclose(rho.mat, expected, atol=1e-15)

    def test_two_branch_projector(self):
        # (|R1,E,vac> + |R2,L,vac>)/sqrt(2): four entries of magnitude 1/2
        i, j = basis_index(A.R1, P.E, P.VAC), basis_index(A.R2, P.L, P.VAC)
        rho = pure_to_density(atom_photon_bell_state())
        amps = np.zeros(36, dtype=complex)
        amps[i] = amps[j] = 1 / np.sqrt(2)
        np.testing.assert_allclose(rho.mat, np.outer(amps, amps.conj()), atol=1e-15)
        assert np.linalg.matrix_rank(rho.mat) == 1
        for a, b in ((i, i), (i, j), (j, i), (j, j)):
            assert abs(rho.mat[a, b]) == pytest.approx(0.5)

    def test_unnormalized_rejected(self):
        amps = np.zeros(36, dtype=complex)
        amps[0] = 0.5
        with pytest.raises(InvalidStateError):
            PureState(amps)


class TestApplyChannel:
    def test_identity(self, rng):
        rho = random_density(rng)
        out = apply_channel(rho, identity_channel())
        np.testing.assert_allclose(out.mat, rho.mat, atol=1e-14)

    def test_full_dephasing_zeroes_r1_r2_coherence(self):
        rho = pure_to_density(
            PureState.from_amplitudes(
                {basis_index(A.R1, P.VAC, P.VAC): 1.0, basis_index(A.R2, P.VAC, P.VAC): 1.0}
            )
        )
        out = apply_channel(rho, dephasing_channel(A.R1))
        i, j = basis_index(A.R1, P.VAC, P.VAC), basis_index(A.R2, P.VAC, P.VAC)
        assert out.mat[i, j] == pytest.approx(0.0, abs=1e-15)
        assert out.mat[i, i] == pytest.approx(0.5)
        assert out.mat[j, j] == pytest.approx(0.5)

    @pytest.mark.parametrize("p", [0.0, 0.3, 0.7, 1.0])
    def test_depolarizing_werner_fidelity(self, p):
        # analytic Werner formula: F = p + (1 - p)/4
        psi = atom_photon_bell_state()
        sub = (
            basis_index(A.R1, P.E, P.VAC),
            basis_index(A.R1, P.L, P.VAC),
            basis_index(A.R2, P.E, P.VAC),
            basis_index(A.R2, P.L, P.VAC),
        )
        out = apply_channel(pure_to_density(psi), depolarizing_channel(p, sub))
        assert state_fidelity(out, psi) == pytest.approx(p + (1 - p) / 4, abs=1e-12)

    def test_incomplete_kraus_rejected(self):
        from rydbell.hilbert import KrausChannel

        with pytest.raises(InvalidChannelError):
            KrausChannel((0.5 * np.eye(36),))


class TestStateFidelity:
    def test_projector_gives_one(self):
        psi = atom_photon_bell_state()
        assert state_fidelity(pure_to_density(psi), psi) == pytest.approx(1.0, abs=1e-12)

    def test_orthogonal_gives_zero(self):
        rho = pure_to_density(basis_state(A.G, P.VAC, P.VAC))
        assert state_fidelity(rho, basis_state(A.R1, P.E, P.VAC)) == 0.0

    @pytest.mark.parametrize("p", [0.2, 0.5, 0.8, 0.95])
    def test_werner_identity(self, p):
        psi = photon_photon_bell_state()
        sub = tuple(
            basis_index(A.G, m1, m2) for m1 in (P.E, P.L) for m2 in (P.E, P.L)
        )
        out = apply_channel(pure_to_density(psi), depolarizing_channel(p, sub))
        assert state_fidelity(out, psi) == pytest.approx((1 + 3 * p) / 4, abs=1e-12)

    def test_global_phase_invariance(self, rng):
        rho = random_density(rng)
        psi = atom_photon_bell_state()
        shifted = PureState(np.exp(1j * 1.234) * psi.amps)
        assert state_fidelity(rho, psi) == pytest.approx(state_fidelity(rho, shifted), abs=1e-12)


class TestPartialTrace:
    def test_product_state_factor(self, rng):
        atom = rng.normal(size=(4, 4)) + 1j * rng.normal(size=(4, 4))
        atom = atom @ atom.conj().T
        atom /= np.trace(atom)
        photons = np.zeros((9, 9), dtype=complex)
        photons[0, 0] = 1.0
        from rydbell.hilbert import DensityOperator

        rho = DensityOperator(np.kron(atom, photons))
        np.testing.assert_allclose(partial_trace(rho, ["atom"]), atom, atol=1e-12)

    def test_entangled_state_atom_margin(self):
        rho = pure_to_density(atom_photon_bell_state())
        np.testing.assert_allclose(
            partial_trace(rho, ["atom"]), np.diag([0.0, 0.5, 0.5, 0.0]), atol=1e-12
        )

    def test_maximally_mixed_photon_margin(self):
        from rydbell.hilbert import DensityOperator

        rho = DensityOperator(np.eye(36) / 36.0)
        np.testing.assert_allclose(partial_trace(rho, ["photon1"]), np.eye(3) / 3.0, atol=1e-12)

    def test_empty_keep_rejected(self):
        rho = pure_to_density(basis_state(A.G, P.VAC, P.VAC))
        with pytest.raises(InvalidStateError):
            partial_trace(rho, [])

    def test_trace_preserved(self, rng):
        rho = random_density(rng)
        for keep in (["atom"], ["photon1"], ["atom", "photon2"], ["photon1", "photon2"]):
            reduced = partial_trace(rho, keep)
            assert np.trace(reduced).real == pytest.approx(1.0, abs=1e-12)

    def test_bell_state_margin_has_no_ground_or_sink_population(self):
        reduced = partial_trace(pure_to_density(atom_photon_bell_state()), ["atom"])
        assert reduced[int(A.G), int(A.G)].real == pytest.approx(0.0, abs=1e-12)
        assert reduced[int(A.D), int(A.D)].real == pytest.approx(0.0, abs=1e-12)


@settings(max_examples=25, deadline=None)
@given(seed=st.integers(0, 2**32 - 1), n_kraus=st.integers(1, 3))
def test_random_channels_preserve_trace_and_positivity(seed, n_kraus):
    rng = np.random.default_rng(seed)
    rho = random_density(rng)
    ch = random_channel(rng, n_kraus)
    out = apply_channel(rho, ch)  # DensityOperator validates trace/positivity
    assert abs(np.trace(out.mat) - 1.0) < 1e-10


@settings(max_examples=15, deadline=None)
@given(seed=st.integers(0, 2**32 - 1))
def test_channel_composition_matches_composed_kraus(seed):
    from rydbell.hilbert import KrausChannel

    rng = np.random.default_rng(seed)
    rho = random_density(rng)
    ch_a = random_channel(rng, 2)
    ch_b = random_channel(rng, 2)
    seq = apply_channel(apply_channel(rho, ch_a), ch_b)
    composed = KrausChannel(tuple(b @ a for b in ch_b.elements for a in ch_a.elements))
    out = apply_channel(rho, composed)
    np.testing.assert_allclose(out.mat, seq.mat, atol=1e-9)


def test_unitary_channel_preserves_purity(rng):
    m = rng.normal(size=(DIM, DIM)) + 1j * rng.normal(size=(DIM, DIM))
    q, _ = np.linalg.qr(m)
    from rydbell.hilbert import unitary_channel

    psi = atom_photon_bell_state()
    out = apply_channel(pure_to_density(psi), unitary_channel(q))
    eigs = np.linalg.eigvalsh(out.mat)
    assert eigs[-1] == pytest.approx(1.0, abs=1e-10)
