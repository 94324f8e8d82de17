"""Exception hierarchy shared by all harmflow modules.

Three broad classes map onto the CLI exit codes: input/validation problems
(exit 2), numerical failures (exit 3), and internal invariant violations
(exit 4).
"""


class HarmflowError(Exception):
    """Base class for all harmflow errors."""


class ValidationError(HarmflowError):
    """Bad input data: malformed files, unknown names, broken invariants."""


class NumericalError(HarmflowError):
    """A solver failed: singular matrix, divergence, collapsed voltage."""


class InternalError(HarmflowError):
    """An internal invariant was violated; indicates a bug, not bad input."""


# --- network / linear algebra ---

class SingularNetwork(NumericalError):
    """Admittance matrix is singular or has an empty diagonal entry."""


# --- fundamental power flow ---

class NonConvergence(NumericalError):
    """Fixed-point power flow failed to converge within the iteration cap."""

    def __init__(self, message, iterations=None, mismatch=None):
        super().__init__(message)
        self.iterations = iterations
        self.mismatch = mismatch


class CollapsedVoltage(NumericalError):
    """Voltage magnitude fell below the configured floor during iteration."""


# --- spectra and injections ---

class MissingOrder(ValidationError):
    """A harmonic order was requested that the spectrum does not define."""


class InsufficientSamples(ValidationError):
    """Waveform too short for the requested number of cycles."""


class FundamentalAbsent(NumericalError):
    """No usable fundamental component found in the analyzed waveform."""


class NyquistViolation(ValidationError):
    """Requested synthesis content above half the sample rate."""


# --- devices ---

class ZeroPower(ValidationError):
    """Load has P = Q = 0; no admittance or source can be derived."""


# --- analytics ---

class ResonancePole(NumericalError):
    """Evaluation requested exactly at an undamped resonance pole."""


class ZeroFundamental(ValidationError):
    """Distortion ratio undefined: fundamental magnitude is zero."""


class EmptySeries(ValidationError):
    """Summary statistics requested for an empty series."""
