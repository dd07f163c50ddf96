import itertools

import numpy as np
import pytest

from pdcbell.bell import OPTIMAL_SETTINGS
from pdcbell.fock import STATION_LABELS, StateVector
from pdcbell.measurement import joint_distribution
from pdcbell.optics import build_experiment_state

#: Every occupation allowed under the two-photon cap (15 of them).
ALLOWED_OCCUPATIONS = [
    occ for occ in itertools.product(range(3), repeat=4) if sum(occ) <= 2 and max(occ) <= 2
]


def random_station_state(rng: np.random.Generator) -> StateVector:
    """A random normalized state over the full allowed occupation support."""
    amps = rng.normal(size=len(ALLOWED_OCCUPATIONS)) + 1j * rng.normal(
        size=len(ALLOWED_OCCUPATIONS)
    )
    return StateVector(dict(zip(ALLOWED_OCCUPATIONS, amps)), STATION_LABELS).normalize()


def random_unitary(rng: np.random.Generator, dim: int = 2) -> np.ndarray:
    """Haar-ish random unitary via QR with phase normalization."""
    z = rng.normal(size=(dim, dim)) + 1j * rng.normal(size=(dim, dim))
    q, r = np.linalg.qr(z)
    return q * (np.diag(r) / np.abs(np.diag(r)))


@pytest.fixture(scope="session")
def psi() -> StateVector:
    return build_experiment_state()


@pytest.fixture(scope="session")
def quantum_tables(psi):
    return [joint_distribution(psi, xi, eta) for xi, eta in OPTIMAL_SETTINGS.setting_pairs()]
