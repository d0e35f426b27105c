"""Exception types. Each carries a short machine-readable ``code`` used by the CLI."""


class NBFTSError(Exception):
    code = "error"


class InvalidParameterError(NBFTSError, ValueError):
    code = "invalid-parameter"


class InvalidStateError(NBFTSError, ValueError):
    code = "invalid-state"


class InvalidInputError(NBFTSError, ValueError):
    code = "invalid-input"


class DegenerateBasisError(NBFTSError, ValueError):
    code = "degenerate-basis"


class DimensionError(NBFTSError, ValueError):
    code = "dimension-mismatch"


class SchemaError(NBFTSError, ValueError):
    code = "schema"
