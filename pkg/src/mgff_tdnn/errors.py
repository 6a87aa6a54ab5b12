"""Exception types shared across the package."""


class DimensionError(ValueError):
    """Shapes or channel counts do not satisfy an operation's contract."""


class AudioFormatError(ValueError):
    """WAV file is not 16-bit PCM, mono, 16 kHz, or is corrupt."""


class TrialParseError(ValueError):
    """Trial or score file line does not match the expected format."""


class WeightFormatError(ValueError):
    """Weight container is malformed or inconsistent with the model."""


class ComplexityMismatchError(ValueError):
    """Analytic layer costs disagree with an instantiated model.

    Carries per-layer diff lines in ``diffs``.
    """

    def __init__(self, message: str, diffs: list[str]):
        super().__init__(message + "\n" + "\n".join(diffs))
        self.diffs = diffs
