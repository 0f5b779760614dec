"""Exception hierarchy.

Every error carries an ``exit_code`` class attribute so the command line
front end can map failures to its stable exit-code contract
(1 I/O, 2 expression/type, 3 data).
"""

from __future__ import annotations


class MlnError(Exception):
    exit_code = 3


# -- data errors (exit 3) ---------------------------------------------------

class EndpointOutOfRange(MlnError, ValueError):
    pass


class SelfLoop(MlnError, ValueError):
    pass


class UniverseMismatch(MlnError, ValueError):
    pass


class PartitionMismatch(MlnError, ValueError):
    pass


class DegenerateUniverse(MlnError, ValueError):
    pass


class ComplementTooLarge(MlnError, RuntimeError):
    pass


class DimensionMismatch(MlnError, ValueError):
    pass


class ValueOutOfRange(MlnError, ValueError):
    pass


class UnknownNodeName(MlnError, KeyError):
    def __str__(self) -> str:  # KeyError quotes its message otherwise
        return str(self.args[0]) if self.args else ""


class UndeclaredAttribute(MlnError, KeyError):
    exit_code = 2

    def __str__(self) -> str:
        return str(self.args[0]) if self.args else ""


class LayerMismatch(MlnError, ValueError):
    pass


class ParseError(MlnError, ValueError):
    """Malformed input file line."""

    def __init__(self, message: str, path=None, line: int | None = None):
        self.path = path
        self.line = line
        where = ""
        if path is not None:
            where = f"{path}"
            if line is not None:
                where += f":{line}"
            where += ": "
        elif line is not None:
            where = f"line {line}: "
        super().__init__(where + message)


class ConfigError(MlnError, ValueError):
    pass


# -- expression errors (exit 2) ---------------------------------------------

class ExpressionError(MlnError):
    exit_code = 2


class ExpressionSyntaxError(ExpressionError, ValueError):
    def __init__(self, message: str, pos: int, text: str = ""):
        self.pos = pos
        self.text = text
        super().__init__(f"{message} at position {pos}")


class UnknownLayer(ExpressionError, KeyError):
    def __str__(self) -> str:
        return str(self.args[0]) if self.args else ""


class UnknownNodeSet(ExpressionError, KeyError):
    def __str__(self) -> str:
        return str(self.args[0]) if self.args else ""


class IllegalTheta(ExpressionError, TypeError):
    def __init__(self, a: str, b: str, kind: str, reason: str = ""):
        self.a, self.b, self.kind = a, b, kind
        msg = f"IllegalTheta: {kind} is not a legal composition of {a!r} and {b!r}"
        if reason:
            msg += f" ({reason})"
        super().__init__(msg)


class IllegalPsi(ExpressionError, TypeError):
    pass


class MixedResultKinds(ExpressionError, TypeError):
    pass


class MissingHubRule(ExpressionError, TypeError):
    pass


class AnchorNotInChain(ExpressionError, ValueError):
    pass


class FilterNotApplicable(ExpressionError, TypeError):
    pass


class NoLayerMention(ExpressionError, ValueError):
    pass
