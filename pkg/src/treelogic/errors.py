"""Error types shared across the package."""

from __future__ import annotations


class TreelogicError(Exception):
    """Base class for all errors raised by this package."""


class ParseError(TreelogicError):
    """Syntax error in a formula, query, grammar, DTD, or problem file.

    Carries a position so callers can point at the offending input.
    """

    def __init__(self, message: str, line: int = 0, column: int = 0):
        self.line = line
        self.column = column
        if line:
            message = f"{message} (line {line}, column {column})"
        super().__init__(message)


class CycleError(TreelogicError):
    """A recursive formula fails the cycle-freeness check.

    Either a variable occurs unguarded (reachable from its binding with no
    modality in between), occurs under an odd number of negations, or can
    reach itself through both a program and its converse.
    """

    def __init__(self, variable: str, programs: tuple[int, int] | None = None,
                 reason: str = ""):
        self.variable = variable
        self.programs = programs
        if programs:
            msg = (f"variable {variable} recurses through program {programs[0]} "
                   f"and its converse {programs[1]}")
        else:
            msg = f"variable {variable} has an unguarded recursive occurrence"
        if reason:
            msg = f"variable {variable}: {reason}"
        super().__init__(msg)


class ResourceLimit(TreelogicError):
    """The solver exceeded its node-type budget.

    Signals that the instance is too large for the configured budget; it
    never indicates a wrong answer.
    """


class UnresolvedPlaceholder(TreelogicError):
    """A formula still contains attribute-universe placeholders.

    resolve_placeholders must run before the solver sees the formula.
    """


class UnexpandedPredicate(TreelogicError):
    """A formula still contains predicate calls; expand must run first."""


class ForestError(TreelogicError):
    """A binary tree whose root has a next-sibling link cannot be read back
    as a single document."""


class UnknownRoot(TreelogicError):
    """The requested root element is not declared in the schema."""

    def __init__(self, root: str, source: str = ""):
        self.root = root
        where = f" in {source}" if source else ""
        super().__init__(f'root element "{root}" is not declared{where}')


class UnsupportedSugar(TreelogicError):
    """A position()/last()/count() construct does not match any of the
    supported rewrite shapes."""


class PredicateError(TreelogicError):
    """Bad predicate usage in a problem file: unknown name, wrong arity,
    wrong argument kind, reserved name, or recursive definition."""


class ArityError(PredicateError):
    """A predicate call supplies the wrong number of arguments."""

    def __init__(self, name: str, got: int, expected: str):
        self.name = name
        self.got = got
        super().__init__(
            f"predicate {name} takes {expected} argument(s), got {got}")


class UnknownPredicate(PredicateError):
    """A call names a predicate that is neither built in nor user-defined."""

    def __init__(self, name: str):
        self.name = name
        super().__init__(f"unknown predicate: {name}")


class UnknownSchemaFile(PredicateError):
    """A schema file referenced by a predicate cannot be read."""

    def __init__(self, path: str):
        self.path = path
        super().__init__(f"cannot read schema file: {path}")


class RootNotFound(PredicateError):
    """The entry-point element named in a predicate call is not defined by
    the referenced schema."""

    def __init__(self, root: str, path: str = ""):
        self.root = root
        where = f" in {path}" if path else ""
        super().__init__(f'entry point "{root}" not found{where}')
