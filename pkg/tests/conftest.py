from __future__ import annotations

import json
from pathlib import Path

import pytest

from switchlab.formula import Dnf, Literal, Space, VarId
from switchlab.experiments import fixture_space

ROOT = Path(__file__).resolve().parents[1]
CONFIGS = ROOT / "configs"
GOLDEN = Path(__file__).resolve().parent / "golden"


def fx(y1, y2, y3):
    return VarId("0", (y1, y2, y3))


def fixture_dnf() -> Dnf:
    """Width-2 DNF touching all four blocks of the fixture space."""
    return Dnf([
        (Literal(fx(0, 0, 0)), Literal(fx(0, 1, 1), False)),
        (Literal(fx(0, 1, 0)), Literal(fx(1, 0, 0))),
        (Literal(fx(1, 0, 1), False), Literal(fx(1, 1, 1))),
        (Literal(fx(1, 1, 0)), Literal(fx(0, 0, 1))),
    ], 2)


def mixed_space() -> Space:
    """Two scale-2 blocks and two scale-4 blocks, two variables each."""
    return Space(VarId(b, (0, j, y)) for b in ("0", "00") for j in (0, 1) for y in (0, 1))


def mx(b, j, y, positive=True):
    return Literal(VarId(b, (0, j, y)), positive)


def mixed_dnf() -> Dnf:
    return Dnf([
        (mx("0", 0, 0), mx("00", 0, 1, False)),
        (mx("00", 1, 0), mx("0", 1, 1)),
        (mx("00", 0, 0), mx("00", 1, 1, False)),
        (mx("0", 0, 1, False), mx("00", 1, 0)),
    ], 2)


def load_config(name: str) -> dict:
    return json.loads((CONFIGS / name).read_text())


@pytest.fixture
def space():
    return fixture_space()


@pytest.fixture
def dnf():
    return fixture_dnf()


_ACCEPTANCE_KEY = pytest.StashKey[list]()


def pytest_configure(config):
    config.stash[_ACCEPTANCE_KEY] = []


@pytest.fixture
def acceptance_log(request):
    return request.config.stash[_ACCEPTANCE_KEY]


def pytest_terminal_summary(terminalreporter, exitstatus, config):
    lines = config.stash.get(_ACCEPTANCE_KEY, [])
    if lines:
        terminalreporter.section("acceptance criteria")
        for line in sorted(lines):
            terminalreporter.write_line(line)
