"""Exception types shared across the package.

Violations found by validators and certifiers are returned as data, never
raised; exceptions are reserved for precondition failures and for queries
whose answer is not determined by the cells materialized so far.
"""


class LoomError(Exception):
    pass


class RegionNotExpanded(LoomError):
    """The query needs cells that have not been materialized yet."""


class NoOrientation(LoomError):
    """The backend carries no (consistent) leafwise orientation."""


class EmptySaturation(LoomError):
    pass


class NotDiagonal(LoomError):
    pass


class IdentityElement(LoomError):
    pass


class ObstructionAtDepth(LoomError):
    """A construction step needs structure outside the expansion window."""

    def __init__(self, msg, depth=None):
        super().__init__(msg)
        self.depth = depth


class TooClose(LoomError):
    pass


class DepthExceeded(LoomError):
    def __init__(self, msg, partial=None):
        super().__init__(msg)
        self.partial = partial


class NotCommuting(LoomError):
    pass


class WindowNotFundamental(LoomError):
    pass


class ResourceLimit(LoomError):
    def __init__(self, msg, stats=None):
        super().__init__(msg)
        self.stats = stats


class TriangulationSyntaxError(LoomError):
    """Bad isoSig or gluing-table text; carries a position for diagnostics."""

    def __init__(self, msg, position=None, line=None):
        loc = ""
        if line is not None:
            loc = " (line %d)" % line
        elif position is not None:
            loc = " (at char %d)" % position
        super().__init__(msg + loc)
        self.position = position
        self.line = line


class LengthMismatch(TriangulationSyntaxError):
    """Angle digit count differs from the number of tetrahedra."""


class PatchSyntaxError(LoomError):
    """Bad synthetic patch file; carries the offending line number."""

    def __init__(self, msg, line):
        super().__init__("%s (line %d)" % (msg, line))
        self.line = line
