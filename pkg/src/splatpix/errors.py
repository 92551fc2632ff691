"""Exception types shared across the package."""


class ParameterError(ValueError):
    """Invalid argument values or mismatched dimensions."""


class DegenerateSkinningError(RuntimeError):
    """Per-vertex blended skinning transform is numerically singular."""


class TopologyError(ValueError):
    """Mesh connectivity violates the operation's requirements."""


class ParseError(ValueError):
    """Malformed input file; carries location info when available."""

    def __init__(self, message, path=None, line=None, offset=None):
        loc = ""
        if path is not None:
            loc += f"{path}"
        if line is not None:
            loc += f":{line}"
        if offset is not None:
            loc += f" (byte {offset})"
        super().__init__(f"{loc}: {message}" if loc else message)
        self.path = path
        self.line = line
        self.offset = offset


class FormatError(ValueError):
    """Binary container header or payload does not match its contract."""
