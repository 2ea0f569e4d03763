"""Exception hierarchy shared by all modules.

The CLI maps each family onto its own exit code, so library code raises the
most specific class available instead of a bare ``ValueError``.
"""


class YoungflowError(Exception):
    """Base class for every error raised by this package."""


class RangeError(YoungflowError, ValueError):
    """A parameter lies outside its documented range."""


class YoungConditionError(RangeError):
    """Integrand and driver exponents do not sum to more than one."""

    def __init__(self, alpha_integrand, alpha_driver):
        self.alpha_integrand = float(alpha_integrand)
        self.alpha_driver = float(alpha_driver)
        super().__init__(
            f"Young condition violated: alpha(integrand)={self.alpha_integrand:.6g} "
            f"+ alpha(driver)={self.alpha_driver:.6g} <= 1"
        )


class ManifoldError(YoungflowError):
    """A point is off the manifold, or a projection failed to converge."""

    def __init__(self, message, index=None):
        self.index = index
        if index is not None:
            message = f"{message} (node {index})"
        super().__init__(message)


class FoliationError(YoungflowError):
    """No admissible invariant splitting exists for the requested system."""


class InvariantError(YoungflowError):
    """A hard numerical invariant failed; signals a bug or a bad input."""


class InputError(YoungflowError):
    """An input file is missing or cannot be parsed."""
