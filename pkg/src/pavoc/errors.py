"""Exception types shared across the package.

Plain invalid arguments (dimension mismatches, out-of-range values) raise
``ValueError``; the classes below cover failures that callers are expected
to dispatch on, e.g. for CLI exit codes.
"""


class PavocError(Exception):
    """Base class for package-specific failures."""


class ConfigurationError(PavocError):
    """Invalid run configuration, including COLA violations (CLI exit 4)."""


class InputFormatError(PavocError):
    """Unreadable or malformed WAV/MELB input (CLI exit 2)."""


class WireProtocolError(PavocError):
    """Malformed frame on the external predictor protocol (CLI exit 3)."""


class PredictorUnavailableError(PavocError):
    """External predictor process died, hung, or never handshook (CLI exit 3)."""


class PredictorContractError(PavocError):
    """Predictor returned a response violating its contract, e.g. wrong length (CLI exit 3)."""
