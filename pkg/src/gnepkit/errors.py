"""Exception hierarchy shared across the package."""


class GnepError(Exception):
    """Base class for all gnepkit errors."""


class DimensionError(GnepError):
    """An input vector or matrix has the wrong shape."""


class InvalidGameError(GnepError):
    """Game data violates a structural requirement (asymmetry, bad bounds, ...)."""


class InfeasibleShareSetError(GnepError):
    """The requested share restrictions make the allocation set empty."""


class DocumentError(GnepError):
    """A problem document is malformed; carries the offending field path."""

    def __init__(self, path, message):
        self.path = path
        super().__init__(f"{path}: {message}")


class OracleBudgetError(GnepError):
    """Problem exceeds the active-set enumeration budget."""


class OracleNoSolutionError(GnepError):
    """No KKT candidate passed feasibility/sign/complementarity checks."""


class OracleNonUniqueError(GnepError):
    """Two or more distinct KKT candidates passed all checks."""

    def __init__(self, candidates):
        self.candidates = candidates
        super().__init__(
            f"{len(candidates)} distinct equilibrium candidates found; "
            "instance has no unique normalized equilibrium"
        )
