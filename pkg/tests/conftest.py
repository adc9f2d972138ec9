from __future__ import annotations

import random

import pytest

from mtpim.hardware import ChipTopology, chip_preset
from mtpim.workload import build_tenant

ACCEPTANCE: dict[str, tuple[bool, str]] = {}


@pytest.fixture
def chip1():
    return chip_preset("chip1")


@pytest.fixture
def chip2():
    return chip_preset("chip2")


def random_chip(rng: random.Random, min_tiles: int = 2) -> ChipTopology:
    return ChipTopology(
        tiles=rng.randint(min_tiles, 24),
        imas_per_tile=rng.randint(1, 3),
        arrays_per_ima=rng.randint(1, 4),
        array_rows=rng.choice([8, 16, 32]),
        array_cols=rng.choice([8, 16, 32]),
        bits_per_cell=2,
        weight_bits=rng.choice([2, 4, 8]),
    )


def random_tenant(rng: random.Random, name: str = "t"):
    size = rng.randint(2, 16)
    shape = (size, rng.randint(2, 16), rng.randint(1, 6))
    h, w = shape[0], shape[1]
    rows = []
    for _ in range(rng.randint(1, 6)):
        if rng.random() < 0.35 and min(h, w) >= 2:
            rows.append({"kind": "pool", "kernel": 2, "stride": 2})
            h, w = -(-h // 2), -(-w // 2)
        else:
            rows.append({"kind": "conv", "kernel": rng.choice([1, 3]), "out": rng.randint(1, 24),
                         "repeat": rng.choice([1, 1, 2])})
    if rng.random() < 0.6:
        rows.append({"kind": "fc", "out": rng.randint(1, 40)})
    return build_tenant(name, shape, rows)


def pytest_terminal_summary(terminalreporter):
    if not ACCEPTANCE:
        return
    terminalreporter.section("acceptance criteria")
    for key in sorted(ACCEPTANCE, key=lambda k: int(k.split()[0][2:])):
        ok, detail = ACCEPTANCE[key]
        terminalreporter.write_line(f"{'PASS' if ok else 'FAIL'}  {key}: {detail}")
