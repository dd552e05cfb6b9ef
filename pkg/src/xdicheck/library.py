"""Builtin primitive library.

Each primitive ships as a data file holding its machine and the verified
blocking/idling conditions. The files are parsed on first use; the full
verification pass (validation, unambiguity, every condition under every
environment) is exercised by verify_library, which the test suite and
the check-library subcommand run end to end.
"""

from __future__ import annotations

from dataclasses import dataclass
from functools import cache
from importlib import resources
from typing import Mapping

from .formulas import Formula, Verdict, parse_condition, verify_condition
from .labeling import check_unambiguous
from .machine import XdiMachine, parse_document, validate

__all__ = [
    "NamedCondition",
    "PrimitiveSpec",
    "PRIMITIVE_NAMES",
    "STORAGE_FULLNESS",
    "builtin_library",
    "get_primitive",
    "LibraryEntryReport",
    "verify_library",
]

PRIMITIVE_NAMES = ("join", "distributor", "fork", "storage", "source", "sink")

# Fullness of the storage machine in its settled states (all handshakes
# at even parity). Only settled states need a fullness value: the
# deadlock-formula projection samples the product space there.
STORAGE_FULLNESS: Mapping[str, bool] = {"s0": False, "s2": True}


@dataclass(frozen=True)
class NamedCondition:
    name: str
    formula: Formula
    text: str


@dataclass(frozen=True)
class PrimitiveSpec:
    name: str
    machine: XdiMachine
    conditions: tuple[NamedCondition, ...]


def _load_primitive(name: str) -> PrimitiveSpec:
    data = resources.files("xdicheck").joinpath("library_data", f"{name}.xdi")
    machine, raw_conditions = parse_document(data.read_text(encoding="utf-8"))
    conditions = tuple(
        NamedCondition(cond_name, parse_condition(text), text)
        for cond_name, text in raw_conditions
    )
    return PrimitiveSpec(machine.name, machine, conditions)


@cache
def builtin_library() -> tuple[PrimitiveSpec, ...]:
    """All shipped primitives, in stable order."""

    return tuple(_load_primitive(name) for name in PRIMITIVE_NAMES)


def get_primitive(name: str) -> PrimitiveSpec:
    for spec in builtin_library():
        if spec.name == name:
            return spec
    raise KeyError(f"no builtin primitive named {name!r}")


@dataclass(frozen=True)
class LibraryEntryReport:
    """Verification outcome for one primitive."""

    primitive: str
    problems: tuple[str, ...]
    verdicts: tuple[tuple[str, Verdict], ...]

    @property
    def ok(self) -> bool:
        return not self.problems and all(v.holds_overall for _, v in self.verdicts)


def verify_library() -> tuple[LibraryEntryReport, ...]:
    """Re-verify every shipped primitive from scratch."""

    reports = []
    for spec in builtin_library():
        problems: list[str] = []
        report = validate(spec.machine)
        problems.extend(report.violations)
        if report.ok:
            for handshake in sorted(spec.machine.handshakes):
                ambiguity = check_unambiguous(spec.machine, handshake)
                if ambiguity.ambiguous:
                    problems.append(f"ambiguous labels for handshake {handshake}")
        verdicts = tuple(
            (cond.name, verify_condition(cond.formula, spec.machine))
            for cond in spec.conditions
        )
        reports.append(LibraryEntryReport(spec.name, tuple(problems), verdicts))
    return tuple(reports)
