"""Exception types shared across the package."""


class FescatError(Exception):
    """Base class for all package-specific errors."""


class RangeLimitError(FescatError, ValueError):
    """A special-function evaluation left the supported (order, argument) range."""

    def __init__(self, func, ell, arg, detail="overflow/underflow"):
        self.func = func
        self.ell = ell
        self.arg = arg
        super().__init__(f"{func}: {detail} at ell={ell}, arg={arg!r}")


class IntegrationError(FescatError, RuntimeError):
    """Radial ODE integration failed; carries the radius that was reached."""

    def __init__(self, radius_reached, detail=""):
        self.radius_reached = radius_reached
        super().__init__(
            f"radial integration failed at r={radius_reached:.6g} {detail}".rstrip()
        )


class InfeasibleMagnitudeError(FescatError, ValueError):
    """Requested |theta| is below the geometric minimum of the theta family."""


class RejectedRunError(FescatError, RuntimeError):
    """Residual ratio gate failed; the reconstruction is withheld."""

    def __init__(self, rho_norm, d_theta, max_ratio):
        self.rho_norm = rho_norm
        self.d_theta = d_theta
        self.max_ratio = max_ratio
        super().__init__(
            f"residual {rho_norm:.3e} exceeds {max_ratio:g} * d(theta)={d_theta:.3e}"
        )


class NonSolvableError(FescatError, RuntimeError):
    """Kernel equation flagged as numerically non-solvable at one or more radii."""

    def __init__(self, radii, min_singular):
        self.radii = list(radii)
        self.min_singular = list(min_singular)
        rs = ", ".join(f"{r:.4g}" for r in self.radii[:8])
        super().__init__(f"kernel equation non-solvable at r = [{rs}]")


class ConfigError(FescatError, ValueError):
    """Configuration failed validation; carries the offending field."""

    def __init__(self, field, detail):
        self.field = field
        super().__init__(f"config field '{field}': {detail}")
