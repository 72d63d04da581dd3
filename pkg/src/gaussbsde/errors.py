"""Exception hierarchy for the laboratory."""


class GaussBsdeError(Exception):
    """Base class for all package errors."""


# --- driver / clock ---------------------------------------------------------

class NonMonotoneVariance(GaussBsdeError):
    """A variance step on the clock grid is <= 0 (invalid covariance model)."""


class CholeskyFailure(GaussBsdeError):
    """Covariance matrix not numerically PSD, even after one jitter retry."""


class OutOfRange(GaussBsdeError):
    """Time or variance argument outside the admissible interval."""


# --- measures ---------------------------------------------------------------

class EmptyMeasure(GaussBsdeError):
    """Empirical measure with no atoms."""


class NonpositiveMass(GaussBsdeError):
    """Entropy functional of a test function with nonpositive total mass."""


class UnsupportedFunctional(GaussBsdeError):
    """Law functional outside the supported family."""


# --- scenario DSL -----------------------------------------------------------

class ProbeViolation(GaussBsdeError):
    """Empirical Lipschitz ratio exceeds the symbolic constant (DSL bookkeeping bug)."""


class EmptyCloud(GaussBsdeError):
    """Particle cloud slice with no particles."""


# --- solver -----------------------------------------------------------------

class PicardDivergence(GaussBsdeError):
    """Picard iteration on the flow of laws did not reach tolerance."""


class RegressionIllConditioned(GaussBsdeError):
    """Normal-equations condition estimate above 1e12 even with ridge."""


class DegenerateInterval(GaussBsdeError):
    """Variance clock does not move on the requested interval."""


# --- Wick layer -------------------------------------------------------------

class DegenerateIncrement(GaussBsdeError):
    """Driver increment with zero variance."""


class GridMismatch(GaussBsdeError):
    """Integrand, paths and clock are not on the same grid."""


# --- theorem checks ---------------------------------------------------------

class HypothesisUnsatisfied(GaussBsdeError):
    """A check refused to run because a theorem hypothesis fails on the inputs."""


class HypothesisUnobserved(GaussBsdeError):
    """Observed solutions violate the ordering hypothesis; conclusion not asserted.

    The partial report is attached as the ``report`` attribute.
    """

    def __init__(self, message, report=None):
        super().__init__(message)
        self.report = report


class UnsupportedScenario(GaussBsdeError):
    """Scenario outside the closed-form family required by the check."""


# --- configuration / IO -----------------------------------------------------

class ConfigInvalid(GaussBsdeError):
    """Experiment configuration failed schema validation; message names the key."""


class IoFailure(GaussBsdeError):
    """Report or manifest could not be written."""
