"""Exception types shared across the package."""


class InvalidArgument(ValueError):
    pass


class EvaluationError(ArithmeticError):
    """A user-supplied function returned a non-finite value."""


class UnsupportedKernel(TypeError):
    pass


class IntegrationDiverged(ArithmeticError):
    def __init__(self, message: str, blowup_time: float | None = None):
        super().__init__(message)
        self.blowup_time = blowup_time


class ShootingFailed(RuntimeError):
    def __init__(self, message: str, diagnostics: dict | None = None):
        super().__init__(message)
        self.diagnostics = diagnostics or {}


class Diverged(ArithmeticError):
    pass
