"""Shared fixtures: corpus paths, parsed machines, and a CLI runner."""

from __future__ import annotations

import contextlib
import io
import pathlib

import pytest

from xdicheck import machine as machine_mod
from xdicheck.cli import main as cli_main

REPO = pathlib.Path(__file__).resolve().parent.parent
MACHINES = REPO / "machines"


@pytest.fixture(scope="session")
def machines_dir() -> pathlib.Path:
    return MACHINES


@pytest.fixture(scope="session")
def join_document() -> str:
    return (MACHINES / "join.xdi").read_text()


@pytest.fixture(scope="session")
def join(join_document):
    parsed, _ = machine_mod.parse_document(join_document)
    return parsed


@pytest.fixture(scope="session")
def join_conditions(join_document):
    _, conditions = machine_mod.parse_document(join_document)
    return conditions


@pytest.fixture(scope="session")
def distributor():
    parsed, _ = machine_mod.parse_document((MACHINES / "distributor.xdi").read_text())
    return parsed


@pytest.fixture(scope="session")
def distributor_conditions():
    _, conditions = machine_mod.parse_document((MACHINES / "distributor.xdi").read_text())
    return conditions


@pytest.fixture(scope="session")
def twopath():
    parsed, _ = machine_mod.parse_document((MACHINES / "ambiguous.xdi").read_text())
    return parsed


class CliResult:
    def __init__(self, code: int, out: str, err: str) -> None:
        self.code = code
        self.out = out
        self.err = err


@pytest.fixture()
def run_cli():
    """Invoke the command line entry in process and capture its streams."""

    def run(*argv: str) -> CliResult:
        out = io.StringIO()
        err = io.StringIO()
        with contextlib.redirect_stdout(out), contextlib.redirect_stderr(err):
            code = cli_main(list(argv))
        return CliResult(code, out.getvalue(), err.getvalue())

    return run
