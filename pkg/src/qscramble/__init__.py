"""Exact-dynamics toolkit for information scrambling in Ising chains."""
from .hamiltonians import (
    HamiltonianSpec,
    build_fast_scrambler,
    build_hamiltonian,
    build_powerlaw_ising,
    kac_constant,
)
from .hilbert import Pauli, apply_local_pauli, product_state, reduced_density_matrix
from .propagation import KrylovConfig, KrylovPropagator, eigendecompose, heisenberg_operator

__version__ = "0.1.0"
