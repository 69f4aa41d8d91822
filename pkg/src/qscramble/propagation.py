"""Exact time evolution: spectral (dense eigendecomposition) and Lanczos/Krylov.

Both propagators expose ``evolve(psi, t)`` returning ``exp(-iHt) psi`` and
``trajectory(psi, times)`` returning an array of shape ``(len(times), dim)``.
"""
from dataclasses import dataclass

import numpy as np
import scipy.linalg

from .errors import KrylovConvergenceError, ResourceLimitError
from .hamiltonians import DENSE_MATRIX_LIMIT, Hamiltonian
from .hilbert import n_qubits_of

OPERATOR_LIMIT = 13
KRYLOV_LIMIT = 22


@dataclass(frozen=True)
class Spectrum:
    eigenvalues: np.ndarray
    eigenvectors: np.ndarray

    @property
    def dim(self):
        return len(self.eigenvalues)

    @property
    def n_qubits(self):
        return n_qubits_of(self.eigenvalues)

    def to_eigenbasis(self, psi):
        return self.eigenvectors.conj().T @ psi

    def from_eigenbasis(self, coeffs):
        return self.eigenvectors @ coeffs

    def evolve(self, psi, t):
        """exp(-iHt) psi; ``psi`` may be a batch of shape (dim, k)."""
        c = self.to_eigenbasis(psi)
        phase = np.exp(-1j * self.eigenvalues * t)
        return self.from_eigenbasis(phase.reshape((-1,) + (1,) * (c.ndim - 1)) * c)

    def trajectory(self, psi, times):
        """States at every time in ``times`` as rows of a (T, dim) array."""
        times = np.asarray(times, dtype=float)
        c = self.to_eigenbasis(np.asarray(psi))
        phases = np.exp(-1j * np.outer(self.eigenvalues, times))
        return (self.from_eigenbasis(phases * c[:, None])).T

    def evolve_columns(self, states, times, sign=-1):
        """Column k of ``states`` evolved by exp(sign * i H times[k])."""
        times = np.asarray(times, dtype=float)
        c = self.to_eigenbasis(states).astype(complex, copy=False)
        c *= np.exp(sign * 1j * np.outer(self.eigenvalues, times))
        return self.from_eigenbasis(c)

    def reconstruct(self):
        v = self.eigenvectors
        return (v * self.eigenvalues) @ v.conj().T


def eigendecompose(hamiltonian, limit=DENSE_MATRIX_LIMIT):
    """Full spectrum of a Hamiltonian (dense, N <= ``limit``)."""
    if isinstance(hamiltonian, Hamiltonian):
        if hamiltonian.n_qubits > limit:
            raise ResourceLimitError("eigendecomposition", hamiltonian.n_qubits, limit)
        h = hamiltonian.to_dense(limit)
    else:
        h = np.asarray(hamiltonian)
        n = n_qubits_of(h) if h.shape[0] > 1 else 0
        if n > limit:
            raise ResourceLimitError("eigendecomposition", n, limit)
    if np.iscomplexobj(h) and not np.any(h.imag):
        h = h.real
    w, v = np.linalg.eigh(h)
    return Spectrum(w, v)


@dataclass(frozen=True)
class KrylovConfig:
    max_dim: int = 40
    tol: float = 1e-12
    dt: float = 0.1

    def __post_init__(self):
        if self.max_dim < 2:
            raise ValueError("Krylov subspace dimension must be >= 2")
        if not self.tol > 0:
            raise ValueError("Krylov tolerance must be positive")
        if not self.dt > 0:
            raise ValueError("Krylov step must be positive")


class KrylovPropagator:
    """Lanczos propagator with full reorthogonalisation.

    Each step of length ``dt`` builds a Krylov space until the a-posteriori
    error ``beta_m |<e_m| exp(-i T dt) |e_1>|`` drops below ``tol`` (relative to
    the input norm). Longer times are split into steps of at most ``config.dt``.
    """

    def __init__(self, hamiltonian, config=None, limit=KRYLOV_LIMIT):
        if hamiltonian.n_qubits > limit:
            raise ResourceLimitError("Krylov state propagation", hamiltonian.n_qubits, limit)
        self.hamiltonian = hamiltonian
        self.config = config or KrylovConfig()
        self.last_error = 0.0

    def step(self, psi, dt):
        m_max, tol = self.config.max_dim, self.config.tol
        norm = np.linalg.norm(psi)
        if norm == 0 or dt == 0:
            return np.array(psi, dtype=complex)
        basis = np.zeros((m_max + 1, len(psi)), dtype=complex)
        alpha = np.zeros(m_max)
        beta = np.zeros(m_max)
        basis[0] = psi / norm
        for j in range(m_max):
            w = self.hamiltonian.matvec(basis[j])
            alpha[j] = np.real(np.vdot(basis[j], w))
            w = w - alpha[j] * basis[j]
            if j > 0:
                w -= beta[j - 1] * basis[j - 1]
            # full reorthogonalisation, applied twice for stability
            for _ in range(2):
                w -= basis[: j + 1].T @ (basis[: j + 1].conj() @ w)
            beta[j] = np.linalg.norm(w)
            m = j + 1
            t_mat = np.diag(alpha[:m]) + np.diag(beta[: m - 1], 1) + np.diag(beta[: m - 1], -1)
            small = scipy.linalg.expm(-1j * dt * t_mat)[:, 0]
            err = beta[j] * abs(small[-1])
            if err < tol or beta[j] < 1e-14 * max(1.0, np.abs(alpha[:m]).max()):
                self.last_error = err
                return norm * (small @ basis[:m])
            basis[j + 1] = w / beta[j]
        raise KrylovConvergenceError(
            f"Lanczos step dt={dt} did not converge within {m_max} vectors "
            f"(error estimate {err:.2e} > tol {tol:.1e}); reduce dt or raise max_dim"
        )

    def evolve(self, psi, t):
        psi = np.array(psi, dtype=complex)
        if t == 0:
            return psi
        n_steps = int(np.ceil(abs(t) / self.config.dt - 1e-9))
        h = t / n_steps
        for _ in range(n_steps):
            psi = self.step(psi, h)
        return psi

    def trajectory(self, psi, times):
        """Sequential stepping through a strictly increasing list of times."""
        times = np.asarray(times, dtype=float)
        out = np.empty((len(times), len(psi)), dtype=complex)
        current, now = np.array(psi, dtype=complex), 0.0
        for k, t in enumerate(times):
            current = self.evolve(current, t - now)
            now = t
            out[k] = current
        return out

    def evolve_columns(self, states, times, sign=-1):
        out = np.empty(states.shape, dtype=complex)
        for k, t in enumerate(times):
            out[:, k] = self.evolve(states[:, k], -sign * t)
        return out


def evolve_state(propagator, state, t):
    return propagator.evolve(state, t)


def _as_spectrum(h_or_spectrum, limit):
    n = h_or_spectrum.n_qubits
    if n > limit:
        raise ResourceLimitError("dense Heisenberg operator", n, limit)
    if isinstance(h_or_spectrum, Spectrum):
        return h_or_spectrum
    return eigendecompose(h_or_spectrum)


def heisenberg_operator(h_or_spectrum, w0, t, limit=OPERATOR_LIMIT):
    """W(t) = exp(iHt) W0 exp(-iHt) as a dense matrix."""
    return next(heisenberg_operators(h_or_spectrum, w0, [t], limit=limit))


def heisenberg_operators(h_or_spectrum, w0, times, limit=OPERATOR_LIMIT):
    """Generator of W(t) for each t in ``times``, sharing one eigenbasis rotation."""
    spec = _as_spectrum(h_or_spectrum, limit)
    v = spec.eigenvectors
    w_eig = v.conj().T @ np.asarray(w0) @ v
    lam = spec.eigenvalues
    for t in times:
        if t == 0:
            yield np.array(w0, dtype=complex)
            continue
        phase = np.exp(1j * lam * t)
        rotated = (phase[:, None] * w_eig) * phase.conj()[None, :]
        yield v @ rotated @ v.conj().T
