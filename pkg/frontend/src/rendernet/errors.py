"""Exception types for the renderer package."""


class ParameterError(ValueError):
    """Invalid argument values or mismatched shapes."""


class FormatError(ValueError):
    """Malformed input file."""


class StateError(RuntimeError):
    """Operation invoked in the wrong training stage."""
