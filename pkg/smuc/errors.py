"""
Exceptions raised by the calculus.

`SmucError` and its subclasses report problems with the user's inputs
(documents, formulas, programs, domains); the command line maps them to exit code 1.
`InvariantViolation` reports a broken internal invariant and maps to exit code 2.
"""
from typing import Optional


class SmucError(RuntimeError):
    """
    Base class of every user-facing error.
    """


class DomainTypeError(SmucError):
    """
    A value does not belong to the carrier of the domain it is used with.
    """


class NoLubError(SmucError):
    pass


class NotASemiringError(SmucError):
    pass


class FieldSchemaError(SmucError):
    pass


class DanglingEdgeError(FieldSchemaError):
    pass


class NonTotalLabelError(FieldSchemaError):
    pass


class RegistryError(SmucError):
    pass


class UnknownCapabilityError(RegistryError):
    pass


class UnknownFunctionError(RegistryError):
    pass


class DuplicateRegistrationError(RegistryError):
    pass


class UnknownLabelError(SmucError):
    pass


class UndefinedLabelError(UnknownLabelError):
    """
    A label was read after being released by ``free``.
    """


class SyntaxErrorWithPosition(SmucError):
    def __init__(
        self, message: str, *, line: int, column: int, grammar: Optional[str] = None
    ):
        super().__init__(f"{message} (line {line}, column {column})")
        self.line = line
        self.column = column
        self.grammar = grammar


class DomainInferenceError(SmucError):
    pass


class NonMonotoneFormulaError(SmucError):
    """
    A fixpoint body applies a non-monotone operator to its variable.
    """


class InfiniteChainError(SmucError):
    """
    A fixpoint iteration did not stabilize within the configured iteration cap.
    """


class MaxStepsExceededError(SmucError):
    pass


class FuelExhaustedError(SmucError):
    def __init__(self, message: str, *, diagnostic: str = ""):
        super().__init__(message if not diagnostic else f"{message}\n{diagnostic}")
        self.diagnostic = diagnostic


class GuardTypeError(SmucError):
    pass


class TranslationError(SmucError):
    pass


class AuxiliaryCollisionError(TranslationError):
    pass


class InfrastructureError(SmucError):
    pass


class ScenarioError(SmucError):
    """
    No connected scenario could be drawn with the requested parameters.
    """


class InvariantViolation(RuntimeError):
    """
    An internal invariant does not hold. This is always a bug.
    """
