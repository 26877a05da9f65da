"""Exception hierarchy shared by all bmlab modules."""


class BMLabError(Exception):
    """Base class for every error raised by bmlab."""


class QuadratureError(BMLabError):
    """Gauss-Hermite projections did not settle under node doubling."""


class DivergenceError(BMLabError):
    """A lattice sum that must be finite failed its convergence diagnostic."""


class EmbeddingError(BMLabError):
    """Circulant embedding produced a spectral value that is genuinely negative."""


class WindowError(BMLabError):
    """A window does not fit inside a sample with the required margin."""


class FeasibilityError(BMLabError):
    """A brute-force computation exceeds its iteration guard."""


class SingularityError(BMLabError):
    """A kernel was evaluated on its singular set."""


class GreenMismatchError(BMLabError):
    """Fourier quadrature and random-walk estimates of the Green function disagree."""


class ConfigError(BMLabError):
    """An experiment configuration violates a constraint."""
