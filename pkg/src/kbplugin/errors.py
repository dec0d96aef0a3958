"""Exception taxonomy shared across the engine.

Every error raised by the package derives from KBPluginError so callers
(service layer, CLI) can map failures to structured responses in one place.
"""


class KBPluginError(Exception):
    """Base class for all engine errors."""


class KBLoadError(KBPluginError):
    """KB file cannot be loaded: malformed content, dangling reference, or
    a subclass cycle. ``kind`` is one of parse/referential/cycle and
    ``record`` carries the offending input record when known."""

    def __init__(self, kind: str, message: str, record=None):
        super().__init__(message)
        self.kind = kind
        self.record = record


class UnknownItemError(KBPluginError):
    """An entity, concept, or relation id does not exist in the KB."""


class ReservedRelationError(KBPluginError):
    """A reserved relation ("instance of" / "subclass of") was used where
    only general relations are allowed."""


class ProgramSyntaxError(KBPluginError):
    """Program text violates the chunk grammar or a function signature."""


class ExecutionError(KBPluginError):
    """Base class for runtime failures while executing a program."""


class NameResolutionError(ExecutionError):
    """A program argument resolves to no entity/relation/concept."""


class StackUnderflowError(ExecutionError):
    """A merge function ran with fewer than two branches on the stack."""


class DenotationTypeError(ExecutionError):
    """A function received a denotation kind outside its signature."""


class NonSingletonValueError(ExecutionError):
    """A comparison function needs exactly one value on top of the stack."""


class IncompleteProgramError(ExecutionError):
    """Execution finished with a branch count other than one."""


class DecoderError(KBPluginError):
    """Beam search could not produce a finished hypothesis."""


class SeedError(DecoderError):
    """No decoding seed is possible: no topic entity or concept resolves."""


class ScorerError(KBPluginError):
    """Scorer transport failed or the response violates the protocol."""

    def __init__(self, message: str, attempts: int = 1):
        super().__init__(message)
        self.attempts = attempts


class AugmentError(KBPluginError):
    """Alias-map coverage or program rewriting failed."""
