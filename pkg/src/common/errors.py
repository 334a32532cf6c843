"""Error taxonomy.

Validation problems (bad input, bad config, misconfigured study area) subclass `ValueError`;
the CLI maps them to exit code 1. Everything else is a runtime failure (exit code 2).
"""


class TrajscopeError(Exception):
    """Base class for all trajscope errors."""


class OutOfBounds(TrajscopeError, ValueError):
    """A location falls outside the grid's study area."""

    def __init__(self, lat: float, lon: float, row: int, col: int) -> None:
        super().__init__(f"point ({lat:.6f}, {lon:.6f}) maps to cell (row={row}, col={col}) outside the grid")
        self.lat = lat
        self.lon = lon
        self.row = row
        self.col = col


class EmptyTrajectory(TrajscopeError, ValueError):
    """A trajectory has no GPS fixes."""


class TooFewPoints(TrajscopeError, ValueError):
    """Fewer embeddings than requested clusters."""


class ShapeMismatch(TrajscopeError, ValueError):
    """Tensor or vector dimensions disagree with the model's hyperparameters."""


class UnknownMode(TrajscopeError, ValueError):
    """Unrecognised context mode."""


class EmptyInput(TrajscopeError, ValueError):
    """An aggregation received no records."""


class DegenerateLabels(TrajscopeError, ValueError):
    """Precision-recall needs at least one positive and one negative label."""


class ConfigError(TrajscopeError, ValueError):
    """Configuration values are individually valid but jointly unusable."""


class MissingContext(TrajscopeError, ValueError):
    """A context mode needs POI grid vectors that were not supplied."""


class RecordParseError(TrajscopeError, ValueError):
    """A record in an input file could not be parsed."""

    def __init__(self, path: str, record: int, reason: str) -> None:
        super().__init__(f"{path}: record {record}: {reason}")
        self.path = path
        self.record = record


class CheckpointVersionError(TrajscopeError, ValueError):
    """Checkpoint header carries an unsupported version tag."""


class NonFiniteLoss(TrajscopeError, RuntimeError):
    """Training produced a NaN or infinite loss."""

    def __init__(self, epoch: int, batch: int, loss: float) -> None:
        super().__init__(f"non-finite loss {loss} at epoch {epoch}, batch {batch}")
        self.epoch = epoch
        self.batch = batch
        self.loss = loss
