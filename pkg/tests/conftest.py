import functools

import numpy as np
import pytest

from qscramble.hamiltonians import build_hamiltonian, local_spec, powerlaw_spec
from qscramble.hilbert import product_state
from qscramble.lightcone import ScramblingField
from qscramble.observables import squared_commutator_field
from qscramble.propagation import eigendecompose


@functools.lru_cache(maxsize=None)
def cached_spectrum(spec):
    """Eigendecompositions are the expensive part; share them across tests."""
    return eigendecompose(build_hamiltonian(spec))


FIELD_TIMES = np.round(np.arange(0, 201) * 0.05, 10)


@functools.lru_cache(maxsize=None)
def cached_field(spec):
    """C_r(t) for W=V=Y, W on site 1, from |Y+>, every site, t in [0, 10] step 0.05."""
    n = spec.n_qubits
    sites = np.arange(1, n + 1)
    c, f = squared_commutator_field(cached_spectrum(spec), 1, "Y", sites, "Y", product_state("Y+", n), FIELD_TIMES)
    return ScramblingField(sites, FIELD_TIMES, c), f


@pytest.fixture(scope="session")
def field():
    return cached_field


@pytest.fixture(scope="session")
def spectrum():
    return cached_spectrum


@pytest.fixture(scope="session")
def local12():
    return cached_spectrum(local_spec(12))


@pytest.fixture
def rng():
    return np.random.default_rng(20240611)


def random_state(rng, n):
    psi = rng.normal(size=2**n) + 1j * rng.normal(size=2**n)
    return psi / np.linalg.norm(psi)


def random_hermitian(rng, n):
    a = rng.normal(size=(2**n, 2**n)) + 1j * rng.normal(size=(2**n, 2**n))
    return (a + a.conj().T) / 2


_ACCEPTANCE = []


def record_acceptance(number, passed, detail):
    _ACCEPTANCE.append((number, passed, detail))


def pytest_terminal_summary(terminalreporter):
    if not _ACCEPTANCE:
        return
    terminalreporter.section("acceptance criteria")
    for number, passed, detail in sorted(_ACCEPTANCE):
        terminalreporter.write_line(f"criterion {number:>2}: {'PASS' if passed else 'FAIL'}  {detail}")
