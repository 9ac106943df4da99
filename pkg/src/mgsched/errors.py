"""Exception types shared across the package."""


class MgschedError(Exception):
    """Base class for all package errors."""


class SchemaError(MgschedError, ValueError):
    """Malformed input file or config: bad header, missing/duplicate rows, unparseable values."""


class DomainError(MgschedError, ValueError):
    """Structurally valid input with out-of-domain values (negative power, bad month, ...)."""


class BuildError(MgschedError, ValueError):
    """Instance assembly failed (inconsistent parameters, infeasible bounds)."""


class SolverError(MgschedError, RuntimeError):
    """Solver could not produce a trustworthy answer."""


class SolverNumericsError(SolverError):
    """Numerical breakdown inside the simplex; carries diagnostics, never a wrong 'optimal'."""
