class SpectralInsError(Exception):
    """Base class of every error raised by the toolkit."""


class InsufficientResolution(SpectralInsError):
    def __init__(self, N, shells):
        self.N = N
        self.shells = shells
        super().__init__(
            f"insufficient resolution: N={N} hosts {shells} dyadic shells, need at least 3"
        )


class IndexRangeError(SpectralInsError, IndexError):
    def __init__(self, j, j_min, j_max):
        self.j = j
        super().__init__(f"dyadic index {j} outside [{j_min}, {j_max}]")


class ZeroModeError(SpectralInsError, ValueError):
    def __init__(self, operation):
        super().__init__(f"undefined zero mode: {operation} needs a mean-zero field")


class GridMismatchError(SpectralInsError, ValueError):
    def __init__(self, left, right):
        super().__init__(f"grid mismatch: {left} vs {right}")


class InvalidIndexError(SpectralInsError, ValueError):
    pass


class InvalidInputError(SpectralInsError, ValueError):
    pass


class EllipticStagnation(SpectralInsError):
    def __init__(self, residual, iterations):
        self.residual = residual
        self.iterations = iterations
        super().__init__(
            f"elliptic solver stagnation: relative residual {residual:.3e} after {iterations} iterations"
        )


class PerturbationTooLarge(SpectralInsError):
    def __init__(self, deviation_norm, contraction):
        self.deviation_norm = deviation_norm
        self.contraction = contraction
        super().__init__(
            f"perturbation too large: ||c||={deviation_norm:.3e}, contraction factor {contraction:.3f}"
        )


class ContinuationFailure(SpectralInsError):
    def __init__(self, theta, step):
        self.theta = theta
        self.step = step
        super().__init__(
            f"continuation failure: homotopy step {step:.2e} underflowed at theta={theta:.4f}"
        )


class SplittingUnreachable(SpectralInsError):
    def __init__(self, threshold, best):
        self.threshold = threshold
        self.best = best
        super().__init__(
            f"splitting threshold unreachable on this grid: best {best:.3e} > {threshold:.3e}"
        )


class FlowNotInvertible(SpectralInsError):
    def __init__(self, deviation):
        self.deviation = deviation
        super().__init__(f"flow not invertible on grid: max |DX - Id| = {deviation:.3e}")


class InverseStagnation(SpectralInsError):
    def __init__(self, defect, iterations):
        self.defect = defect
        self.iterations = iterations
        super().__init__(
            f"inverse iteration stagnation: defect {defect:.3e} after {iterations} iterations"
        )


class LinearFixedPointFailed(SpectralInsError):
    def __init__(self, contraction):
        self.contraction = contraction
        super().__init__(
            f"linear fixed point failed; reduce T or data (contraction factor {contraction:.3f})"
        )


class NoAdmissibleHorizon(SpectralInsError):
    def __init__(self, T, smallness):
        self.T = T
        self.smallness = smallness
        super().__init__(
            f"no admissible local horizon at this resolution: T={T:.3e}, smallness {smallness:.3e}"
        )


class ConfigError(SpectralInsError):
    def __init__(self, message, field=None, line=None):
        self.field = field
        self.line = line
        where = ""
        if field is not None:
            where += f" field {field}"
        if line is not None:
            where += f" (line {line})"
        super().__init__(f"invalid config{where}: {message}")
