"""Exception hierarchy. ConfigError maps to CLI exit 1, NumericError to exit 2."""


class SorlLabError(Exception):
    pass


class ConfigError(SorlLabError):
    """Invalid inputs: bad world definitions, unknown classes, bad parameters."""


class InvalidWorldError(ConfigError):
    pass


class UnknownClassError(ConfigError):
    pass


class RegimeError(ConfigError):
    """Toy parameters violate the requested closed-form assumption regime."""


class NumericError(SorlLabError):
    """A computation cannot proceed: degeneracies, non-convergence, failed assumptions."""


class ZeroDegreeError(NumericError):
    def __init__(self, vertices):
        self.vertices = tuple(int(v) for v in vertices)
        super().__init__(f"vertices with degree <= eps: {self.vertices}")


class DegenerateGapError(NumericError):
    pass


class NegativeEigenvalueError(NumericError):
    pass


class ConvergenceError(NumericError):
    def __init__(self, message, loss, grad_norm):
        self.loss = float(loss)
        self.grad_norm = float(grad_norm)
        super().__init__(f"{message} (loss={loss:.6e}, grad_norm={grad_norm:.6e})")


class DegenerateNormalizerError(NumericError):
    pass


class DegenerateInterError(NumericError):
    pass


class RepeatedEigenvalueError(NumericError):
    def __init__(self, pairs):
        self.pairs = tuple((int(i), int(j)) for i, j in pairs)
        super().__init__(f"eigenvalue pairs closer than the gap tolerance: {self.pairs}")


class AssumptionError(NumericError):
    def __init__(self, assumption, magnitude, threshold):
        self.assumption = assumption
        self.magnitude = float(magnitude)
        self.threshold = float(threshold)
        super().__init__(
            f"assumption '{assumption}' violated: {magnitude:.6e} vs threshold {threshold:.6e}"
        )


class EmptyClusterError(NumericError):
    pass
