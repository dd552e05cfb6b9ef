"""Boolean conditions over blocked/idle atoms.

Conditions are small formulas such as `blocked(a) <-> blocked(c) | idle(b)`.
Verifying one against a machine means evaluating it under every reasonable
environment, with blocked(h) and idle(h) answered by the checker. The same
AST doubles as the constraint language for deadlock instances, where the
atoms have been substituted by free boolean variables.
"""

from __future__ import annotations

from dataclasses import dataclass
from itertools import product as cartesian
from typing import Callable, Iterable, Iterator, Mapping, Sequence, Union

from . import checker
from .labeling import UnknownHandshakeError
from .machine import Environment, XdiMachine, format_env
from .sexpr import ParseError

__all__ = [
    "Formula",
    "Const",
    "TRUE",
    "FALSE",
    "BlockedAtom",
    "IdleAtom",
    "VarAtom",
    "Not",
    "And",
    "Or",
    "Implies",
    "Iff",
    "parse_condition",
    "to_dsl",
    "atoms",
    "condition_handshakes",
    "formula_variables",
    "map_atoms",
    "rename_handshakes",
    "expand_iff",
    "to_nnf",
    "evaluate",
    "eval_condition",
    "EnvVerdict",
    "Verdict",
    "verify_condition",
    "smt_term",
    "satisfying_models",
    "first_model",
    "discover_equations",
]


@dataclass(frozen=True)
class Const:
    value: bool


@dataclass(frozen=True)
class BlockedAtom:
    handshake: str


@dataclass(frozen=True)
class IdleAtom:
    handshake: str


@dataclass(frozen=True)
class VarAtom:
    name: str


@dataclass(frozen=True)
class Not:
    operand: "Formula"


@dataclass(frozen=True)
class And:
    lhs: "Formula"
    rhs: "Formula"


@dataclass(frozen=True)
class Or:
    lhs: "Formula"
    rhs: "Formula"


@dataclass(frozen=True)
class Implies:
    lhs: "Formula"
    rhs: "Formula"


@dataclass(frozen=True)
class Iff:
    lhs: "Formula"
    rhs: "Formula"


Formula = Union[Const, BlockedAtom, IdleAtom, VarAtom, Not, And, Or, Implies, Iff]

TRUE = Const(True)
FALSE = Const(False)


# --- Parsing -----------------------------------------------------------------
#
# Grammar, loosest binding first:
#   iff     := implies ('<->' implies)*          left associative
#   implies := or ('->' implies)?                right associative
#   or      := and ('|' and)*                    left associative
#   and     := unary ('&' unary)*                left associative
#   unary   := '!' unary | primary
#   primary := 'true' | 'false' | 'blocked' '(' name ')'
#            | 'idle' '(' name ')' | '(' iff ')'

_PUNCT = {"(", ")", "!", "&", "|", "->", "<->"}


def _lex(text: str) -> list[tuple[str, str, int, int]]:
    tokens = []
    line, col = 1, 1
    i = 0
    while i < len(text):
        ch = text[i]
        if ch == "\n":
            line += 1
            col = 1
            i += 1
            continue
        if ch.isspace():
            col += 1
            i += 1
            continue
        if ch.isalpha() or ch == "_":
            start = i
            while i < len(text) and (text[i].isalnum() or text[i] == "_"):
                i += 1
            word = text[start:i]
            tokens.append(("name", word, line, col))
            col += i - start
            continue
        if ch in "()!&|":
            tokens.append(("punct", ch, line, col))
            i += 1
            col += 1
            continue
        if text.startswith("<->", i):
            tokens.append(("punct", "<->", line, col))
            i += 3
            col += 3
            continue
        if text.startswith("->", i):
            tokens.append(("punct", "->", line, col))
            i += 2
            col += 2
            continue
        raise ParseError(f"unexpected character {ch!r} in condition", line, col)
    tokens.append(("eof", "", line, col))
    return tokens


class _ConditionParser:
    def __init__(self, text: str) -> None:
        self.tokens = _lex(text)
        self.pos = 0

    def peek(self) -> tuple[str, str, int, int]:
        return self.tokens[self.pos]

    def take(self) -> tuple[str, str, int, int]:
        token = self.tokens[self.pos]
        self.pos += 1
        return token

    def expect_punct(self, value: str) -> None:
        kind, text, line, col = self.take()
        if kind != "punct" or text != value:
            shown = text if text else "end of input"
            raise ParseError(f"expected {value!r}, found {shown!r}", line, col)

    def at_punct(self, value: str) -> bool:
        kind, text, _, _ = self.peek()
        return kind == "punct" and text == value

    def parse(self) -> Formula:
        form = self.iff()
        kind, text, line, col = self.peek()
        if kind != "eof":
            raise ParseError(f"trailing input starting at {text!r}", line, col)
        return form

    def iff(self) -> Formula:
        form = self.implies()
        while self.at_punct("<->"):
            self.take()
            form = Iff(form, self.implies())
        return form

    def implies(self) -> Formula:
        form = self.disjunction()
        if self.at_punct("->"):
            self.take()
            return Implies(form, self.implies())
        return form

    def disjunction(self) -> Formula:
        form = self.conjunction()
        while self.at_punct("|"):
            self.take()
            form = Or(form, self.conjunction())
        return form

    def conjunction(self) -> Formula:
        form = self.unary()
        while self.at_punct("&"):
            self.take()
            form = And(form, self.unary())
        return form

    def unary(self) -> Formula:
        if self.at_punct("!"):
            self.take()
            return Not(self.unary())
        return self.primary()

    def primary(self) -> Formula:
        kind, text, line, col = self.take()
        if kind == "punct" and text == "(":
            inner = self.iff()
            self.expect_punct(")")
            return inner
        if kind == "name":
            if text == "true":
                return TRUE
            if text == "false":
                return FALSE
            if text in ("blocked", "idle"):
                self.expect_punct("(")
                kind2, name, line2, col2 = self.take()
                if kind2 != "name":
                    raise ParseError("expected a handshake name", line2, col2)
                self.expect_punct(")")
                return BlockedAtom(name) if text == "blocked" else IdleAtom(name)
            raise ParseError(f"unknown atom {text!r}", line, col)
        shown = text if text else "end of input"
        raise ParseError(f"expected a formula, found {shown!r}", line, col)


def parse_condition(text: str) -> Formula:
    """Parse the condition DSL into a formula."""

    return _ConditionParser(text).parse()


# --- Rendering ---------------------------------------------------------------

_PRECEDENCE = {Iff: 1, Implies: 2, Or: 3, And: 4, Not: 5}


def _precedence(form: Formula) -> int:
    return _PRECEDENCE.get(type(form), 6)


def _render(form: Formula, parent: int, right_of_same: bool) -> str:
    prec = _precedence(form)
    if isinstance(form, Const):
        text = "true" if form.value else "false"
    elif isinstance(form, BlockedAtom):
        text = f"blocked({form.handshake})"
    elif isinstance(form, IdleAtom):
        text = f"idle({form.handshake})"
    elif isinstance(form, VarAtom):
        text = form.name
    elif isinstance(form, Not):
        text = "!" + _render(form.operand, prec, False)
    else:
        symbol = {Iff: "<->", Implies: "->", Or: "|", And: "&"}[type(form)]
        if isinstance(form, Implies):
            # right associative: the left side needs parens at equal depth
            left = _render(form.lhs, prec, True)
            right = _render(form.rhs, prec, False)
        else:
            left = _render(form.lhs, prec, False)
            right = _render(form.rhs, prec, True)
        text = f"{left} {symbol} {right}"
    if prec < parent or (prec == parent and right_of_same):
        return f"({text})"
    return text


def to_dsl(form: Formula) -> str:
    """Render a formula back to DSL text; parse(to_dsl(f)) == f."""

    return _render(form, 0, False)


# --- Structure helpers -------------------------------------------------------


def atoms(form: Formula) -> Iterator[Formula]:
    """Yield every atom, left to right, duplicates included."""

    stack = [form]
    while stack:
        node = stack.pop()
        if isinstance(node, (BlockedAtom, IdleAtom, VarAtom)):
            yield node
        elif isinstance(node, Not):
            stack.append(node.operand)
        elif isinstance(node, (And, Or, Implies, Iff)):
            stack.append(node.rhs)
            stack.append(node.lhs)


def condition_handshakes(form: Formula) -> frozenset[str]:
    return frozenset(
        atom.handshake for atom in atoms(form) if isinstance(atom, (BlockedAtom, IdleAtom))
    )


def formula_variables(forms: Iterable[Formula]) -> tuple[str, ...]:
    """Sorted free variable names across the given formulas."""

    names = set()
    for form in forms:
        for atom in atoms(form):
            if isinstance(atom, VarAtom):
                names.add(atom.name)
    return tuple(sorted(names))


def map_atoms(form: Formula, fn: Callable[[Formula], Formula]) -> Formula:
    """Rebuild the formula with every atom passed through fn."""

    if isinstance(form, (BlockedAtom, IdleAtom, VarAtom)):
        return fn(form)
    if isinstance(form, Not):
        return Not(map_atoms(form.operand, fn))
    if isinstance(form, (And, Or, Implies, Iff)):
        rebuilt = type(form)(map_atoms(form.lhs, fn), map_atoms(form.rhs, fn))
        return rebuilt
    return form


def rename_handshakes(form: Formula, mapping: Mapping[str, str]) -> Formula:
    def rename(atom: Formula) -> Formula:
        if isinstance(atom, BlockedAtom):
            return BlockedAtom(mapping.get(atom.handshake, atom.handshake))
        if isinstance(atom, IdleAtom):
            return IdleAtom(mapping.get(atom.handshake, atom.handshake))
        return atom

    return map_atoms(form, rename)


def expand_iff(form: Formula) -> Formula:
    """Rewrite every iff as the conjunction of its two implications."""

    if isinstance(form, Iff):
        lhs = expand_iff(form.lhs)
        rhs = expand_iff(form.rhs)
        return And(Implies(lhs, rhs), Implies(rhs, lhs))
    if isinstance(form, Not):
        return Not(expand_iff(form.operand))
    if isinstance(form, (And, Or, Implies)):
        return type(form)(expand_iff(form.lhs), expand_iff(form.rhs))
    return form


def to_nnf(form: Formula) -> Formula:
    """Negation normal form: connectives and/or only, negation on atoms."""

    def positive(node: Formula) -> Formula:
        if isinstance(node, Not):
            return negative(node.operand)
        if isinstance(node, (And, Or)):
            return type(node)(positive(node.lhs), positive(node.rhs))
        if isinstance(node, Implies):
            return Or(negative(node.lhs), positive(node.rhs))
        if isinstance(node, Iff):
            return Or(
                And(positive(node.lhs), positive(node.rhs)),
                And(negative(node.lhs), negative(node.rhs)),
            )
        return node

    def negative(node: Formula) -> Formula:
        if isinstance(node, Const):
            return Const(not node.value)
        if isinstance(node, Not):
            return positive(node.operand)
        if isinstance(node, And):
            return Or(negative(node.lhs), negative(node.rhs))
        if isinstance(node, Or):
            return And(negative(node.lhs), negative(node.rhs))
        if isinstance(node, Implies):
            return And(positive(node.lhs), negative(node.rhs))
        if isinstance(node, Iff):
            return Or(
                And(positive(node.lhs), negative(node.rhs)),
                And(negative(node.lhs), positive(node.rhs)),
            )
        return Not(node)

    return positive(form)


# --- Evaluation --------------------------------------------------------------


def evaluate(form: Formula, resolve: Callable[[Formula], bool]) -> bool:
    """Evaluate with atoms answered by the resolve callback."""

    if isinstance(form, Const):
        return form.value
    if isinstance(form, (BlockedAtom, IdleAtom, VarAtom)):
        return resolve(form)
    if isinstance(form, Not):
        return not evaluate(form.operand, resolve)
    if isinstance(form, And):
        return evaluate(form.lhs, resolve) and evaluate(form.rhs, resolve)
    if isinstance(form, Or):
        return evaluate(form.lhs, resolve) or evaluate(form.rhs, resolve)
    if isinstance(form, Implies):
        return (not evaluate(form.lhs, resolve)) or evaluate(form.rhs, resolve)
    if isinstance(form, Iff):
        return evaluate(form.lhs, resolve) == evaluate(form.rhs, resolve)
    raise TypeError(f"not a formula: {form!r}")


def _machine_resolver(machine: XdiMachine, env: Environment) -> Callable[[Formula], bool]:
    def resolve(atom: Formula) -> bool:
        if isinstance(atom, BlockedAtom):
            return checker.blocked(machine, atom.handshake, env)
        if isinstance(atom, IdleAtom):
            return checker.idle(machine, atom.handshake, env)
        raise ValueError(f"free variable {atom.name!r} in a machine condition")

    return resolve


def _check_atoms_known(form: Formula, machine: XdiMachine) -> None:
    for name in sorted(condition_handshakes(form)):
        if name not in machine.handshakes:
            raise UnknownHandshakeError(
                f"machine {machine.name} has no handshake {name!r}"
            )


def eval_condition(form: Formula, machine: XdiMachine, env: Environment) -> bool:
    """Evaluate one condition under one environment."""

    _check_atoms_known(form, machine)
    return evaluate(form, _machine_resolver(machine, env))


@dataclass(frozen=True)
class EnvVerdict:
    """Condition outcome under a single environment.

    For an iff-rooted condition, lhs and rhs are the two sides' values;
    for any other shape both carry the formula's value.
    """

    env: Environment
    lhs: bool
    rhs: bool
    holds: bool

    def describe(self) -> str:
        flag = "holds" if self.holds else "FAILS"
        return f"{format_env(self.env)}: lhs={self.lhs} rhs={self.rhs} {flag}"


@dataclass(frozen=True)
class Verdict:
    """Per-environment outcomes for one condition against one machine."""

    holds_overall: bool
    per_env: tuple[EnvVerdict, ...]

    @property
    def failing_envs(self) -> tuple[EnvVerdict, ...]:
        return tuple(entry for entry in self.per_env if not entry.holds)


def verify_condition(form: Formula, machine: XdiMachine) -> Verdict:
    """Evaluate the condition under every reasonable environment.

    Environments are visited smallest first; the verdict preserves that
    order. Set XDI_CHECK_THREADS to spread the evaluations over a pool.
    """

    _check_atoms_known(form, machine)

    def run(env: Environment) -> EnvVerdict:
        resolve = _machine_resolver(machine, env)
        if isinstance(form, Iff):
            lhs = evaluate(form.lhs, resolve)
            rhs = evaluate(form.rhs, resolve)
            return EnvVerdict(env, lhs, rhs, lhs == rhs)
        value = evaluate(form, resolve)
        return EnvVerdict(env, value, value, value)

    entries = checker.map_jobs(run, checker.reasonable_envs(machine))
    return Verdict(all(entry.holds for entry in entries), tuple(entries))


# --- SMT-LIB rendering -------------------------------------------------------


def _flatten(form: Formula, cls: type) -> Iterator[Formula]:
    if isinstance(form, cls):
        yield from _flatten(form.lhs, cls)
        yield from _flatten(form.rhs, cls)
    else:
        yield form


def smt_term(form: Formula) -> str:
    """Render a variable-only formula as an SMT-LIB 2 term."""

    if isinstance(form, Const):
        return "true" if form.value else "false"
    if isinstance(form, VarAtom):
        return form.name
    if isinstance(form, (BlockedAtom, IdleAtom)):
        raise ValueError("blocked/idle atoms must be substituted before emission")
    if isinstance(form, Not):
        return f"(not {smt_term(form.operand)})"
    if isinstance(form, (And, Or)):
        word = "and" if isinstance(form, And) else "or"
        parts = " ".join(smt_term(part) for part in _flatten(form, type(form)))
        return f"({word} {parts})"
    if isinstance(form, Implies):
        return f"(=> {smt_term(form.lhs)} {smt_term(form.rhs)})"
    if isinstance(form, Iff):
        return f"(= {smt_term(form.lhs)} {smt_term(form.rhs)})"
    raise TypeError(f"not a formula: {form!r}")


# --- Exhaustive satisfiability ----------------------------------------------


def satisfying_models(
    forms: Sequence[Formula], variables: Sequence[str] | None = None
) -> Iterator[dict[str, bool]]:
    """Enumerate assignments satisfying every formula, lexicographically
    with False before True over the sorted variable list."""

    names = tuple(variables) if variables is not None else formula_variables(forms)
    for bits in cartesian((False, True), repeat=len(names)):
        model = dict(zip(names, bits))
        resolve = lambda atom: model[atom.name]
        if all(evaluate(form, resolve) for form in forms):
            yield model


def first_model(
    forms: Sequence[Formula], variables: Sequence[str] | None = None
) -> dict[str, bool] | None:
    """First satisfying assignment in enumeration order, or None."""

    return next(iter(satisfying_models(forms, variables)), None)


# --- Equation discovery ------------------------------------------------------


def _candidate_rhs(leaves: Sequence[Formula], max_ops: int) -> Iterator[Formula]:
    by_size: list[list[Formula]] = [list(leaves)]
    yield from by_size[0]
    for size in range(1, max_ops + 1):
        layer: list[Formula] = []
        for left_size in range(size):
            right_size = size - 1 - left_size
            for lhs in by_size[left_size]:
                for rhs in by_size[right_size]:
                    layer.append(Or(lhs, rhs))
                    layer.append(And(lhs, rhs))
        by_size.append(layer)
        yield from layer


def discover_equations(
    machine: XdiMachine,
    lhs: Formula,
    max_ops: int = 2,
    negated_leaves: bool = True,
) -> tuple[Formula, ...]:
    """Search small right-hand sides r such that `lhs <-> r` verifies.

    Candidates are and/or combinations of blocked/idle atoms (optionally
    negated) over the machine's handshakes, with at most max_ops binary
    connectives. Every structurally distinct match is returned, smallest
    first; all of them are equivalent over the environment set.
    """

    envs = checker.reasonable_envs(machine)
    table: dict[Formula, tuple[bool, ...]] = {}
    for name in sorted(machine.handshakes):
        table[BlockedAtom(name)] = tuple(
            checker.blocked(machine, name, env) for env in envs
        )
        table[IdleAtom(name)] = tuple(checker.idle(machine, name, env) for env in envs)

    def signature(form: Formula) -> tuple[bool, ...]:
        return tuple(
            evaluate(form, lambda atom, i=i: table[atom][i]) for i in range(len(envs))
        )

    _check_atoms_known(lhs, machine)
    goal = signature(lhs)
    leaves: list[Formula] = list(table)
    if negated_leaves:
        leaves.extend(Not(leaf) for leaf in list(table))
    found: list[Formula] = []
    seen: set[Formula] = set()
    for candidate in _candidate_rhs(leaves, max_ops):
        if candidate not in seen and signature(candidate) == goal:
            seen.add(candidate)
            found.append(candidate)
    return tuple(found)
