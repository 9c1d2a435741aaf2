"""Exception hierarchy shared across the toolkit.

Every error a caller is expected to handle has its own class; plain
``ValueError``/``OSError`` are reserved for programming mistakes and raw IO.
"""


class EsvForgeError(Exception):
    """Base class for all toolkit errors."""


# -- taxonomy ---------------------------------------------------------------

class MalformedLabelError(EsvForgeError):
    """Label string does not have exactly three dot-separated components."""


class UnknownNameError(EsvForgeError):
    def __init__(self, level: str, text: str):
        super().__init__(f"unknown {level} name: {text!r}")
        self.level = level
        self.text = text


class HierarchyViolationError(EsvForgeError):
    """Task is not registered under the phase named in the label."""


# -- annotations ------------------------------------------------------------

class SchemaError(EsvForgeError):
    """Annotation export does not match the documented schema subset."""


class UnknownClipError(EsvForgeError):
    pass


class SegmentExceedsClipError(EsvForgeError):
    pass


class UnlabelledError(EsvForgeError):
    """Queried time point falls in a gap between labelled segments."""


class OutOfRangeError(EsvForgeError):
    pass


# -- frame pipeline ---------------------------------------------------------

class NoForegroundError(EsvForgeError):
    """Binary threshold produced an empty mask; caller may fall back to identity."""


class EmptyStreamError(EsvForgeError):
    pass


class UnsupportedContainerError(EsvForgeError):
    pass


# -- dataset ----------------------------------------------------------------

class MalformedFilenameError(EsvForgeError):
    pass


# -- temporal head ----------------------------------------------------------

class DimensionMismatchError(EsvForgeError):
    pass


class EmptyEnsembleError(EsvForgeError):
    pass


# -- metrics ----------------------------------------------------------------

class LengthMismatchError(EsvForgeError):
    pass


class EmptyInputError(EsvForgeError):
    pass


class DegenerateClassesError(EsvForgeError):
    """ROC needs at least one positive and one negative sample."""


# -- timeline index / service ------------------------------------------------

class UnorderedInputError(EsvForgeError):
    pass


class UnknownLabelNameError(EsvForgeError):
    pass


class VersionMismatchError(EsvForgeError):
    """Persisted document is missing, corrupt, or of an unsupported schema."""


class BindFailureError(EsvForgeError):
    pass
