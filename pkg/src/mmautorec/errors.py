"""Exception hierarchy shared by the package."""


class MMAError(Exception):
    """Base class for all errors raised by mmautorec."""


class ConfigError(MMAError, ValueError):
    """Invalid configuration value or combination."""


class DataError(MMAError, ValueError):
    """Problem with a rating file or dataset contents."""


class ParseError(DataError):
    def __init__(self, path, lineno, message):
        self.path = path
        self.lineno = lineno
        super().__init__(f"{path}:{lineno}: {message}")


class DuplicateEntryError(ParseError):
    pass


class RatingRangeError(ParseError):
    pass


class EmptyDatasetError(DataError):
    pass


class NoObservationError(MMAError, ValueError):
    """A gradient was requested for an item column without observations."""


class TrainingError(MMAError, RuntimeError):
    """Training aborted, e.g. because a gradient became non-finite."""

    def __init__(self, message, variant=None, epoch=None):
        self.variant = variant
        self.epoch = epoch
        where = []
        if variant is not None:
            where.append(f"variant {variant}")
        if epoch is not None:
            where.append(f"epoch {epoch}")
        prefix = f"[{', '.join(where)}] " if where else ""
        super().__init__(prefix + message)


class EnsembleStateError(MMAError, ValueError):
    pass


class CheckpointError(MMAError, IOError):
    """Checkpoint is unreadable, truncated or fails its integrity check."""


class LookupIdError(MMAError, KeyError):
    def __str__(self):
        return str(self.args[0]) if self.args else ""
