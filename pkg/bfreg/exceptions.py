"""Error hierarchy shared by every module; each class carries its CLI exit code."""


class BfregError(Exception):
    exit_code = 1

    def __init__(self, detail: str):
        super().__init__(detail)
        self.detail = detail


class ConfigurationError(BfregError):
    """Bad shapes, bad strategy parameters, unknown config keys."""
    exit_code = 1


class InputError(BfregError):
    """Bad data: CSV schema violations, nonpositive moduli, zero-norm targets."""
    exit_code = 1


class NoShockError(InputError):
    """The nozzle field or parameter admits no shock."""


class DivergenceError(BfregError):
    """Loss or parameters became NaN/Inf during training."""
    exit_code = 2

    def __init__(self, detail: str, iteration: int | None = None):
        super().__init__(detail)
        self.iteration = iteration
