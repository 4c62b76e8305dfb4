"""Exception hierarchy.

Everything raised on purpose by minebench derives from :class:`MinebenchError`,
so callers (and the CLI) can separate library failures from bugs.
"""


class MinebenchError(Exception):
    """Base class for all minebench errors."""


# core model
class AttributeOutOfRange(MinebenchError, IndexError):
    """A rule condition references an attribute the profile does not have."""


class ConflictingConditions(MinebenchError, ValueError):
    """Two conditions bind the same attribute to different values."""


class InvalidMatrix(MinebenchError, ValueError):
    pass


class InconsistentScenario(MinebenchError, ValueError):
    """The stored ACM does not match the ground-truth policy."""


# decision engine
class DenyRuleUnderPermitOnly(MinebenchError, ValueError):
    pass


# generator
class InvalidParams(MinebenchError, ValueError):
    pass


class GenerationExhausted(MinebenchError, RuntimeError):
    pass


class DensityUnreachable(MinebenchError, RuntimeError):
    pass


class EmptyMatrix(MinebenchError, ValueError):
    pass


# serialization
class ParseError(MinebenchError, ValueError):
    def __init__(self, message, line=None):
        self.line = line
        if line is not None:
            message = f"line {line}: {message}"
        super().__init__(message)


class NoRulesFound(ParseError):
    pass


class MalformedRule(ParseError):
    pass


class KindMismatch(ParseError):
    pass


# prompts
class IncompatibleInputMethod(MinebenchError, ValueError):
    pass


class TemplateChecksumMismatch(MinebenchError, RuntimeError):
    pass


# providers
class ProviderError(MinebenchError, RuntimeError):
    """Transport-level failure talking to a provider."""


class MissingCredential(ProviderError):
    pass


# miners
class NoPermits(MinebenchError, ValueError):
    pass


class InconsistentMatrix(MinebenchError, ValueError):
    """A permit cell and a deny cell share identical attribute vectors."""


class ScaleExceeded(MinebenchError, ValueError):
    pass


class BudgetExceeded(MinebenchError, RuntimeError):
    """No consistent policy exists within the requested size budget."""


# metrics
class DimensionMismatch(MinebenchError, ValueError):
    pass


class InvalidCounts(MinebenchError, ValueError):
    pass
