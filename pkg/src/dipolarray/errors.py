"""Exception types shared across the library."""

import math


class DipolarrayError(Exception):
    """Base class for errors raised by this library."""


class GeometryError(DipolarrayError):
    """Invalid or degenerate atom geometry."""


class ModeError(DipolarrayError):
    """Invalid optical mode parameters."""


class ConfigError(DipolarrayError):
    """Scenario configuration failed validation."""


class NumericalError(DipolarrayError):
    """A numerical routine left its domain of validity."""


class GrazingOrderError(NumericalError):
    """A diffraction order sits at grazing incidence.

    The flat-array emission rate into a channel diverges as the
    out-of-plane wavenumber goes to zero, so configurations within
    tolerance of |g_mn| = k0 are rejected rather than evaluated.
    """

    def __init__(self, m, n, g_norm):
        self.order = (m, n)
        self.g_norm = g_norm
        super().__init__(
            f"diffraction order ({m},{n}) is grazing: |g| = {g_norm:.9g} "
            f"within tolerance of k0 = {2 * math.pi:.9g}; the channel rate "
            "diverges there"
        )


class DegenerateModeError(NumericalError):
    """Eigenvector cluster too ill-conditioned to normalize.

    Raised when a vector's unconjugated self-product |v.v| collapses,
    which signals a defective or quasi-null eigenpair.
    """
