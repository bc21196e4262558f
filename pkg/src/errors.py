"""Exception types shared across the lab.

Non-invertibility is not an error here: ring and pseudo-inverse searches return
``NotInvertible`` / ``NotFound`` values instead (see ``src.params_ring`` and
``src.backdoor``).
"""


class LabError(Exception):
    """Base class for every error raised by the lab."""


class ParameterError(LabError, ValueError):
    """Invalid or mismatched parameters."""


class UnsupportedParameterError(ParameterError):
    """The parameter set lacks a feature the operation needs (e.g. NTT support)."""


class ConfigError(LabError, ValueError):
    """Bad configuration file, flag or environment value."""


class TrapdoorGenerationError(LabError, RuntimeError):
    """Trapdoor sampling exhausted its retry budget."""


class ClaimFailure(LabError):
    """A verified claim did not hold."""

    def __init__(self, claim_id: str, detail: str):
        super().__init__(f"{claim_id}: {detail}")
        self.claim_id = claim_id
        self.detail = detail


class DecodeError(LabError, ValueError):
    """A wire message or export could not be decoded."""


class BadMagicError(DecodeError):
    pass


class BadVersionError(DecodeError):
    pass


class TruncatedMessageError(DecodeError):
    pass


class CoefficientRangeError(DecodeError):
    pass


class MessageTypeError(DecodeError):
    pass


class HelpLengthError(DecodeError):
    pass


class ParamMismatchError(DecodeError):
    pass
