"""Exception hierarchy shared by the library and the command line runner."""


class QScrambleError(Exception):
    """Base class; ``exit_code`` is what the CLI returns for this category."""

    exit_code = 1


class ConfigError(QScrambleError, ValueError):
    """Invalid experiment configuration (schema or semantic check)."""

    exit_code = 2


class ResourceLimitError(QScrambleError):
    """Requested system size exceeds a configured dense/Krylov limit."""

    exit_code = 3

    def __init__(self, what, n_qubits, limit):
        self.n_qubits = n_qubits
        self.limit = limit
        super().__init__(
            f"{what} requested for N={n_qubits} qubits, limit is N<={limit} "
            f"(raise the corresponding limit to override; memory grows as "
            f"{'4' if 'operator' in what else '2'}^N)"
        )


class NumericalError(QScrambleError, ArithmeticError):
    """A numerical routine failed to reach its tolerance."""

    exit_code = 4


class KrylovConvergenceError(NumericalError):
    pass
