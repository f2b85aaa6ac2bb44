import numpy as np
import pytest

from rydbell.hilbert import DIM, DensityOperator, KrausChannel


def random_density(rng: np.random.Generator) -> DensityOperator:
    m = rng.normal(size=(DIM, DIM)) + 1j * rng.normal(size=(DIM, DIM))
    rho = m @ m.conj().T
    return DensityOperator(rho / np.trace(rho))


def random_channel(rng: np.random.Generator, n_kraus: int) -> KrausChannel:
    """Random CPTP map from a QR-orthonormalized block isometry."""
    m = rng.normal(size=(n_kraus * DIM, DIM)) + 1j * rng.normal(size=(n_kraus * DIM, DIM))
    q, _ = np.linalg.qr(m)
    return KrausChannel(tuple(q[i * DIM : (i + 1) * DIM, :] for i in range(n_kraus)))


@pytest.fixture
def rng() -> np.random.Generator:
    return np.random.default_rng(20240811)
