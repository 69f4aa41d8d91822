"""Pauli-string expansion of Heisenberg operators, operator density and size.

Pauli strings are indexed by an integer whose base-4 digit ``m - 1`` is the
Pauli kind on site ``m`` (0=1, 1=X, 2=Y, 3=Z), mirroring the site-1-is-LSB
convention for qubit bases. The size of a string is its rightmost
non-identity site (0 for the identity string).

The operator density is obtained without a full expansion: the normalised
partial trace onto sites ``1..l`` keeps exactly the strings of size <= l, so
its squared norm is the cumulative density sum_{l' <= l} p_l'.
"""
from dataclasses import dataclass

import numpy as np

from .errors import ResourceLimitError
from .hilbert import PAULI_MATRICES, Pauli, check_site, n_qubits_of, partial_trace_operator

DECOMPOSITION_LIMIT = 7

_PAULI_STACK = np.stack([PAULI_MATRICES[p] for p in Pauli])


def string_kinds(index, n_qubits):
    """Per-site Pauli kinds of string ``index`` (site 1 first)."""
    return tuple(Pauli((index >> (2 * m)) & 3) for m in range(n_qubits))


def string_index(kinds):
    return sum(int(Pauli.parse(k)) << (2 * m) for m, k in enumerate(kinds))


def string_size(index):
    """Rightmost non-identity site of a string (0 for the identity)."""
    return (int(index).bit_length() + 1) // 2


def pauli_string(kinds):
    """Dense matrix of the string with ``kinds[m-1]`` on site m."""
    out = np.ones((1, 1), dtype=complex)
    for k in kinds:
        out = np.kron(PAULI_MATRICES[Pauli.parse(k)], out)
    return out


def pauli_decompose(op):
    """Coefficients c_Lambda = 2^-N Tr(S_Lambda^dag op) for all 4^N strings."""
    op = np.asarray(op)
    n = n_qubits_of(op)
    if n > DECOMPOSITION_LIMIT:
        raise ResourceLimitError("explicit Pauli decomposition (4^N coefficients)", n, DECOMPOSITION_LIMIT)
    # tensor axes: rows (site N..1) then columns (site N..1)
    t = op.reshape((2,) * (2 * n))
    conj_paulis = _PAULI_STACK.conj()
    for j in range(n):
        # contract row axis j and column axis j (both site N - j) with conj(P)[k, r, c];
        # the new Pauli axis is appended, so sites end up ordered N..1
        t = np.tensordot(t, conj_paulis, axes=([0, n - j], [1, 2]))
    return t.reshape(-1) / 2**n


def reconstruct(coeffs, n_qubits):
    out = np.zeros((2**n_qubits, 2**n_qubits), dtype=complex)
    for idx in np.flatnonzero(np.abs(coeffs) > 0):
        out += coeffs[idx] * pauli_string(string_kinds(idx, n_qubits))
    return out


def string_sizes(n_qubits):
    idx = np.arange(4**n_qubits)
    sizes = np.zeros(idx.shape, dtype=int)
    for m in range(1, n_qubits + 1):
        sizes[(idx >> (2 * (m - 1))) & 3 != 0] = m
    return sizes


@dataclass(frozen=True)
class OperatorDensityProfile:
    p: np.ndarray
    p0: float = 0.0
    time: float = float("nan")

    @property
    def n_qubits(self):
        return len(self.p)

    @property
    def total(self):
        return float(self.p0 + self.p.sum())


def density_from_coefficients(coeffs, n_qubits, time=float("nan")):
    """Operator density from an explicit expansion (sums of |c|^2 by size)."""
    weights = np.bincount(string_sizes(n_qubits), weights=np.abs(coeffs) ** 2, minlength=n_qubits + 1)
    return OperatorDensityProfile(weights[1:], float(weights[0]), time)


def cumulative_weights(op):
    """<W_l^dag W_l> for l = 0..N, with W_0 the identity component."""
    op = np.asarray(op)
    n = n_qubits_of(op)
    out = np.empty(n + 1)
    out[0] = abs(np.trace(op) / 2**n) ** 2
    for ell in range(1, n):
        w_l = partial_trace_operator(op, ell)
        out[ell] = np.sum(np.abs(w_l) ** 2) / 2**ell
    out[n] = np.sum(np.abs(op) ** 2) / 2**n
    return out


def operator_density_profile(op, time=float("nan")):
    """p_l = <W_l W_l> - <W_{l-1} W_{l-1}> for l = 1..N; identity weight in ``p0``."""
    cum = cumulative_weights(op)
    return OperatorDensityProfile(np.diff(cum), float(cum[0]), time)


def operator_size(profile):
    """L = sum_l l p_l over l >= 1; accepts a profile or a plain p array."""
    p = profile.p if isinstance(profile, OperatorDensityProfile) else np.asarray(profile, dtype=float)
    return float(np.dot(np.arange(1, len(p) + 1), p))


def haar_operator_size(n):
    if n < 1:
        raise ValueError("N must be >= 1")
    return n * (1 + 1 / (4.0**n - 1)) - 1 / 3


def haar_density(ell, n):
    """Uniform weight over non-identity strings: 3 * 4^(l-1) / (4^N - 1)."""
    if not 1 <= ell <= n:
        raise ValueError(f"size {ell} outside 1..{n}")
    return 3 * 4.0 ** (ell - 1) / (4.0**n - 1)


def haar_profile(n):
    return np.array([haar_density(ell, n) for ell in range(1, n + 1)])


def average_squared_commutator(op, site):
    """Mean of C_r^V over V in {1, X, Y, Z} at infinite temperature.

    Equals the weight on strings acting nontrivially on ``site``: the full
    squared norm minus the norm of the site-traced (identity-on-site) part.
    """
    op = np.asarray(op)
    n = n_qubits_of(op)
    check_site(site, n)
    hi, lo = 2 ** (n - site), 2 ** (site - 1)
    t = op.reshape(hi, 2, lo, hi, 2, lo)
    traced = np.einsum("aibcid->abcd", t) / 2
    total = np.sum(np.abs(op) ** 2) / 2**n
    identity_part = np.sum(np.abs(traced) ** 2) / 2 ** (n - 1)
    return float(total - identity_part)
