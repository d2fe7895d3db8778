"""Exception types shared across the package."""


class TelewalkError(Exception):
    """Base class for all package errors."""


class ContractViolation(TelewalkError):
    """An operation was called outside its stated preconditions."""


class InvalidInput(TelewalkError):
    """Inputs are numerically or physically meaningless."""


class GimbalLockError(TelewalkError):
    """Pitch too close to +/-90 deg for a usable euler-angle state."""


class NoFitError(TelewalkError):
    """Step-timing fit could not produce an estimate.

    ``z_cl_est`` carries a partial clearance estimate when the data was
    flat but otherwise usable (degenerate swing).
    """

    def __init__(self, msg: str, z_cl_est: float | None = None):
        super().__init__(msg)
        self.z_cl_est = z_cl_est


class ResyncError(TelewalkError):
    """A pilot gait event contradicted the reference generator's domain."""


class UndefinedCop(TelewalkError):
    """Center of pressure is undefined (no vertical load)."""


class PilotSourceError(TelewalkError):
    """A pilot sample stream violated its schema or liveness contract."""
