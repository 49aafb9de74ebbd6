"""Exception types shared across the package."""


class ConfigurationError(ValueError):
    """Inputs are inconsistent or a grid cannot resolve the requested quantity."""


class FitError(RuntimeError):
    """A spectral or fringe fit could not find what it was asked to fit."""


class AmbiguityError(FitError):
    """Several comparable peaks compete for the dominant beat note."""

    def __init__(self, message, candidates=()):
        super().__init__(message)
        self.candidates = list(candidates)


class TagFileError(ValueError):
    """A time-tag file is malformed.

    ``offset`` is the byte offset of the offending data and ``record`` the
    record index, when known.
    """

    def __init__(self, message, offset=None, record=None):
        where = []
        if record is not None:
            where.append(f"record {record}")
        if offset is not None:
            where.append(f"byte offset {offset}")
        super().__init__(f"{message} ({', '.join(where)})" if where else message)
        self.offset = offset
        self.record = record
