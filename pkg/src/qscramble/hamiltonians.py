"""Mixed-field Ising chains: local, powerlaw and fast-scrambler variants.

All three families share the form

    H = -sum_{m<n} J_mn Z_m Z_n - h_x sum_m X_m - h_z sum_m Z_m

on an open chain, so a Hamiltonian is fully described by its diagonal (the
ZZ and Z part in the computational basis) plus the uniform transverse field.
That lets us apply H matrix-free for Krylov propagation and only build the
dense matrix when an eigendecomposition is needed.
"""
import math
from dataclasses import asdict, dataclass

import numpy as np

from .errors import ResourceLimitError

FAMILIES = ("local", "powerlaw", "fast_scrambler")

DENSE_MATRIX_LIMIT = 14
# the diagonal alone takes 8 * 2^N bytes (2 GiB at N=28)
HAMILTONIAN_LIMIT = 24


@dataclass(frozen=True)
class HamiltonianSpec:
    family: str
    n_qubits: int
    alpha: float = math.inf
    kac: bool = False
    gamma: float = 0.5
    J: float = 1.0
    hx: float = -1.05
    hz: float = 0.5

    def __post_init__(self):
        if self.family not in FAMILIES:
            raise ValueError(f"family must be one of {FAMILIES}, got {self.family!r}")
        if int(self.n_qubits) != self.n_qubits or self.n_qubits < 2:
            raise ValueError(f"n_qubits must be an integer >= 2, got {self.n_qubits}")
        if math.isnan(self.alpha) or self.alpha < 0:
            raise ValueError(f"alpha must be >= 0 or inf, got {self.alpha}")
        if self.family == "local" and not math.isinf(self.alpha):
            raise ValueError("the local family is the alpha = inf limit; leave alpha unset")
        if math.isnan(self.gamma):
            raise ValueError("gamma must be a real number or inf")

    @property
    def label(self):
        if self.family == "local":
            return "local"
        if self.family == "fast_scrambler":
            return "fs" if self.gamma == 0.5 else f"fs_gamma{self.gamma:g}"
        norm = "kac" if self.kac else "k1"
        return f"alpha{self.alpha:g}_{norm}"

    def to_dict(self):
        d = asdict(self)
        d["alpha"] = "inf" if math.isinf(self.alpha) else self.alpha
        d["gamma"] = "inf" if math.isinf(self.gamma) else self.gamma
        return d

    @classmethod
    def from_dict(cls, d):
        d = dict(d)
        for key in ("alpha", "gamma"):
            if key in d:
                d[key] = float(d[key])
        return cls(**d)

    def replace(self, **changes):
        d = asdict(self)
        d.update(changes)
        return HamiltonianSpec(**d)


def _distance_powers(alpha, n):
    """Matrix of 1/|m-n|^alpha for m<n (upper triangle), zero elsewhere."""
    idx = np.arange(n)
    dist = np.abs(idx[:, None] - idx[None, :]).astype(float)
    upper = np.triu(np.ones((n, n), dtype=bool), k=1)
    out = np.zeros((n, n))
    if math.isinf(alpha):
        out[upper & (dist == 1)] = 1.0
    else:
        out[upper] = dist[upper] ** -alpha
    return out


def kac_constant(alpha, n):
    """Kac factor (1/(N-1)) sum_{m<n} 1/|m-n|^alpha; equals 1 for alpha = inf."""
    if n < 2:
        raise ValueError("Kac normalisation needs N >= 2")
    return float(_distance_powers(alpha, n).sum() / (n - 1))


def couplings(spec):
    """Upper-triangular N x N matrix of ZZ couplings J_mn (m < n)."""
    n = spec.n_qubits
    if spec.family == "fast_scrambler":
        local = spec.J * _distance_powers(math.inf, n)
        if math.isinf(spec.gamma):
            return local
        return local + np.triu(np.ones((n, n)), k=1) * n ** (-spec.gamma)
    alpha = math.inf if spec.family == "local" else spec.alpha
    kappa = kac_constant(alpha, n) if spec.kac else 1.0
    return spec.J * _distance_powers(alpha, n) / kappa


def z_configurations(n_qubits):
    """(2**N, N) array of Z eigenvalues +-1; column m-1 is site m."""
    b = np.arange(2**n_qubits)[:, None]
    bits = (b >> np.arange(n_qubits)[None, :]) & 1
    return (1 - 2 * bits).astype(np.int8)


class Hamiltonian:
    """Mixed-field Ising Hamiltonian stored as diagonal + uniform bit-flip term."""

    def __init__(self, spec, limit=HAMILTONIAN_LIMIT):
        if spec.n_qubits > limit:
            raise ResourceLimitError("Hamiltonian diagonal storage", spec.n_qubits, limit)
        self.spec = spec
        self.n_qubits = spec.n_qubits
        self.dim = 2**spec.n_qubits
        self.couplings = couplings(spec)
        b = np.arange(self.dim)
        z = [(1 - 2 * ((b >> m) & 1)).astype(np.int8) for m in range(self.n_qubits)]
        diag = np.zeros(self.dim)
        for m in range(self.n_qubits):
            diag -= spec.hz * z[m]
            for k in range(m + 1, self.n_qubits):
                if self.couplings[m, k] != 0:
                    diag -= self.couplings[m, k] * (z[m] * z[k])
        self.diagonal = diag
        self.hx = spec.hx

    def matvec(self, v):
        """H @ v without forming H; v may carry trailing batch axes."""
        v = np.asarray(v)
        out = self.diagonal.reshape((-1,) + (1,) * (v.ndim - 1)) * v
        if self.hx != 0:
            n = self.n_qubits
            for site in range(1, n + 1):
                view = v.reshape((2 ** (n - site), 2, 2 ** (site - 1)) + v.shape[1:])
                flipped = view[:, ::-1].reshape(v.shape)
                out -= self.hx * flipped
        return out

    __matmul__ = matvec

    def to_dense(self, limit=DENSE_MATRIX_LIMIT):
        if self.n_qubits > limit:
            raise ResourceLimitError("dense Hamiltonian matrix", self.n_qubits, limit)
        h = np.diag(self.diagonal)
        b = np.arange(self.dim)
        for site in range(self.n_qubits):
            h[b, b ^ (1 << site)] = -self.hx
        return h

    def expectation(self, psi):
        psi = np.asarray(psi)
        return float(np.real(np.vdot(psi, self.matvec(psi))))

    def __repr__(self):
        return f"Hamiltonian({self.spec!r})"


def build_powerlaw_ising(spec):
    if spec.family not in ("powerlaw", "local"):
        raise ValueError(f"expected a powerlaw or local spec, got {spec.family!r}")
    return Hamiltonian(spec)


def build_fast_scrambler(spec):
    if spec.family != "fast_scrambler":
        raise ValueError(f"expected a fast_scrambler spec, got {spec.family!r}")
    return Hamiltonian(spec)


def build_hamiltonian(spec):
    if spec.family == "fast_scrambler":
        return build_fast_scrambler(spec)
    return build_powerlaw_ising(spec)


def local_spec(n, **kw):
    return HamiltonianSpec("local", n, **kw)


def powerlaw_spec(n, alpha, kac=True, **kw):
    return HamiltonianSpec("powerlaw", n, alpha=alpha, kac=kac, **kw)


def fast_scrambler_spec(n, gamma=0.5, **kw):
    return HamiltonianSpec("fast_scrambler", n, gamma=gamma, **kw)


def reference_models(n):
    """The four variants compared throughout: local, alpha=1.1 (Kac), FS, alpha=0.4 (kappa=1)."""
    return [
        local_spec(n),
        powerlaw_spec(n, 1.1, kac=True),
        fast_scrambler_spec(n),
        powerlaw_spec(n, 0.4, kac=False),
    ]
