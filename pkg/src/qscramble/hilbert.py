"""Basis bookkeeping for an N-qubit chain.

States are plain complex numpy arrays of length ``2**N``. Basis index ``b``
stores qubit ``m`` (1-based) in bit ``m - 1``, so site 1 is the least
significant bit. Every module in the package uses this convention, including
for operators (row and column indices) and reduced density matrices (the
smallest kept site is the least significant bit of the reduced index).

A state array may carry extra trailing axes (e.g. shape ``(2**N, k)``); the
local-operator routines act on the first axis only, which lets callers batch
many states or apply a Pauli to the rows of an operator matrix.
"""
import enum

import numpy as np


class Pauli(enum.IntEnum):
    I = 0
    X = 1
    Y = 2
    Z = 3

    @classmethod
    def parse(cls, value):
        if isinstance(value, Pauli):
            return value
        if isinstance(value, str):
            key = value.strip().upper()
            if key in ("1", "ID", "IDENTITY"):
                key = "I"
            try:
                return cls[key]
            except KeyError:
                pass
        elif isinstance(value, (int, np.integer)) and 0 <= value <= 3:
            return cls(int(value))
        raise ValueError(f"unknown Pauli kind {value!r}")


PAULI_MATRICES = {
    Pauli.I: np.eye(2, dtype=complex),
    Pauli.X: np.array([[0, 1], [1, 0]], dtype=complex),
    Pauli.Y: np.array([[0, -1j], [1j, 0]], dtype=complex),
    Pauli.Z: np.array([[1, 0], [0, -1]], dtype=complex),
}

_S = 1 / np.sqrt(2)
# Z|0> = +|0>, so "Z+" is the computational |0>.
SINGLE_QUBIT_STATES = {
    "Z+": np.array([1, 0], dtype=complex),
    "Z-": np.array([0, 1], dtype=complex),
    "X+": np.array([_S, _S], dtype=complex),
    "X-": np.array([_S, -_S], dtype=complex),
    "Y+": np.array([_S, 1j * _S], dtype=complex),
    "Y-": np.array([_S, -1j * _S], dtype=complex),
}


def n_qubits_of(array):
    """Number of qubits implied by the leading dimension of ``array``."""
    dim = np.shape(array)[0]
    n = int(dim).bit_length() - 1
    if dim < 2 or 2**n != dim:
        raise ValueError(f"leading dimension {dim} is not a power of two")
    return n


def check_site(site, n_qubits):
    if not 1 <= site <= n_qubits:
        raise ValueError(f"site {site} outside 1..{n_qubits}")
    return int(site)


def make_region(sites, n_qubits):
    """Validate and normalise a region to a sorted tuple of 1-based sites."""
    region = tuple(int(s) for s in sites)
    if any(b <= a for a, b in zip(region, region[1:])):
        raise ValueError(f"region {list(sites)} is not strictly increasing")
    for s in region:
        check_site(s, n_qubits)
    return region


def left_block(size):
    return tuple(range(1, size + 1))


def half_chain(n_qubits):
    """Left half of the chain, ``{1..N//2}``."""
    return left_block(n_qubits // 2)


def product_state(descriptor, n_qubits):
    """Tensor power of one of the six single-qubit Pauli eigenstates."""
    try:
        local = SINGLE_QUBIT_STATES[descriptor.strip().upper()]
    except (KeyError, AttributeError):
        raise ValueError(
            f"unsupported product-state descriptor {descriptor!r}; "
            f"expected one of {sorted(SINGLE_QUBIT_STATES)}"
        ) from None
    if n_qubits < 1:
        raise ValueError("n_qubits must be >= 1")
    psi = np.ones(1, dtype=complex)
    for _ in range(n_qubits):
        # new site becomes the most significant bit
        psi = np.kron(local, psi)
    return psi


def basis_state(bits, n_qubits):
    psi = np.zeros(2**n_qubits, dtype=complex)
    psi[bits] = 1.0
    return psi


def _site_view(array, site, n_qubits):
    shape = array.shape
    return array.reshape((2 ** (n_qubits - site), 2, 2 ** (site - 1)) + shape[1:])


def apply_local_pauli(state, kind, site):
    """Return ``P_site @ state`` using bit-slicing only.

    ``state`` may have trailing batch axes. A new array is returned.
    """
    kind = Pauli.parse(kind)
    n = n_qubits_of(state)
    check_site(site, n)
    src = _site_view(np.asarray(state), site, n)
    out = np.empty(src.shape, dtype=np.result_type(src.dtype, complex))
    lo, hi = src[:, 0], src[:, 1]
    if kind is Pauli.I:
        out[...] = src
    elif kind is Pauli.X:
        out[:, 0], out[:, 1] = hi, lo
    elif kind is Pauli.Y:
        out[:, 0], out[:, 1] = -1j * hi, 1j * lo
    else:
        out[:, 0], out[:, 1] = lo, -hi
    return out.reshape(np.shape(state))


def local_operator(kind, site, n_qubits):
    """Dense ``2**N x 2**N`` matrix of a single-site Pauli (small N only)."""
    kind = Pauli.parse(kind)
    check_site(site, n_qubits)
    return np.kron(
        np.kron(np.eye(2 ** (n_qubits - site)), PAULI_MATRICES[kind]),
        np.eye(2 ** (site - 1)),
    )


def _split(state, keep, n_qubits):
    """Reshape a state into a (traced, kept) matrix."""
    keep = make_region(keep, n_qubits)
    if not keep or len(keep) == n_qubits:
        raise ValueError("region must be a nonempty proper subset of the chain")
    # axis j of the (2,)*N tensor holds site N - j
    kept_axes = [n_qubits - s for s in reversed(keep)]
    traced_axes = [a for a in range(n_qubits) if a not in kept_axes]
    batch = np.shape(state)[1:]
    tensor = np.asarray(state).reshape((2,) * n_qubits + batch)
    extra = tuple(range(n_qubits, n_qubits + len(batch)))
    m = tensor.transpose(extra + tuple(traced_axes) + tuple(kept_axes))
    return m.reshape(batch + (2 ** len(traced_axes), 2 ** len(kept_axes)))


def reduced_density_matrix(state, keep):
    """rho_A = Tr_B |psi><psi| for the sites in ``keep``."""
    n = n_qubits_of(state)
    m = _split(state, keep, n)
    return m.T @ m.conj()


def schmidt_probabilities(state, keep):
    """Squared Schmidt coefficients across the cut ``keep | rest``.

    Works on the smaller side automatically (singular values are symmetric),
    and accepts a batch of states with shape ``(2**N, k)``.
    """
    n = n_qubits_of(state)
    m = _split(state, keep, n)
    s = np.linalg.svd(m, compute_uv=False)
    return s**2


def partial_trace_operator(op, prefix_len):
    """Identity-normalised partial trace of ``op`` onto sites ``1..prefix_len``.

    Returns ``2**-(N-l) Tr_{l+1..N} op``; for ``prefix_len == N`` this is ``op``.
    """
    n = n_qubits_of(op)
    if not 1 <= prefix_len <= n:
        raise ValueError(f"prefix length {prefix_len} outside 1..{n}")
    lo, hi = 2**prefix_len, 2 ** (n - prefix_len)
    blocks = np.asarray(op).reshape(hi, lo, hi, lo)
    return np.einsum("iaib->ab", blocks) / hi


def trace_out_site(op, site):
    """Normalised partial trace over a single site, embedded back as ``X (x) 1``.

    The result has the same shape as ``op``; it is the projection of ``op`` onto
    Pauli strings that act as the identity on ``site``.
    """
    n = n_qubits_of(op)
    check_site(site, n)
    hi, lo = 2 ** (n - site), 2 ** (site - 1)
    t = np.asarray(op).reshape(hi, 2, lo, hi, 2, lo)
    reduced = np.einsum("aibcid->abcd", t) / 2
    out = np.zeros_like(t)
    out[:, 0, :, :, 0, :] = reduced
    out[:, 1, :, :, 1, :] = reduced
    return out.reshape(np.shape(op))
