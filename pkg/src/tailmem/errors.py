"""Exception types raised across the package."""


class TailmemError(Exception):
    """Base class; ``to_dict`` feeds the CLI's JSON error channel."""

    def to_dict(self):
        return {"error": type(self).__name__, "message": str(self)}


class ConfigError(TailmemError, ValueError):
    pass


class EmptySupport(TailmemError):
    """Every training row is empty, so there is nothing to fit."""


class NonFinite(TailmemError, ValueError):
    pass


class DimensionMismatch(TailmemError, ValueError):
    pass


class InsufficientSingletons(TailmemError):
    def __init__(self, available, requested):
        self.available = available
        self.requested = requested
        super().__init__(
            f"requested {requested} singleton tail features, only {available} eligible"
        )

    def to_dict(self):
        out = super().to_dict()
        out.update(available=self.available, requested=self.requested)
        return out


class RunError(TailmemError):
    """Wraps a failure inside the pipeline with the (config, seed) that hit it."""

    def __init__(self, context, cause):
        self.context = context
        self.cause = cause
        super().__init__(f"{type(cause).__name__}: {cause} [{context}]")

    def to_dict(self):
        out = super().to_dict()
        out["context"] = self.context
        out["cause"] = type(self.cause).__name__
        return out
