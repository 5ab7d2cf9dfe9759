"""Exception types. Each carries a short machine-readable ``code``."""


class GWError(Exception):
    code = "ERROR"

    def __init__(self, message: str = "", code: str | None = None):
        super().__init__(message or self.code)
        if code is not None:
            self.code = code


class DistributionError(GWError, ValueError):
    code = "INVALID_DISTRIBUTION"


class KindMismatch(GWError, ValueError):
    code = "KIND_MISMATCH"


class BudgetExceeded(GWError, MemoryError):
    code = "NODE_BUDGET"


class NotNeighbors(GWError, ValueError):
    code = "NOT_NEIGHBORS"


class ExcursionsExhausted(GWError, RuntimeError):
    code = "EXCURSIONS_EXHAUSTED"


class InsufficientBlocks(GWError, ValueError):
    code = "INSUFFICIENT_BLOCKS"


class EmptySamples(GWError, ValueError):
    code = "EMPTY_SAMPLES"


class CategoryMismatch(GWError, ValueError):
    code = "CATEGORY_MISMATCH"


class ConfigError(GWError, ValueError):
    code = "CONFIG_INVALID"
