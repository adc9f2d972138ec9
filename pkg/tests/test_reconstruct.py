import random
from fractions import Fraction

import pytest
from hypothesis import given, settings, strategies as st

from mtpim.errors import InfeasibleBetaError, InfeasibleError
from mtpim.hardware import ChipTopology, PowerModel
from mtpim.mapping import Footprint
from mtpim.profiler import classic_duplication
from mtpim.reconstruct import (
    CLASSIC,
    CLASSIC_GRID,
    DEFAULT_GRID,
    INF,
    Grid,
    ReconstructionParams,
    build_reoperators,
    duplicate,
    evaluate_point,
    minimum_area,
    parse_alpha,
    parse_beta,
    processing_time,
    split,
)
from mtpim.workload import build_tenant, load_preset

from conftest import random_chip, random_tenant
from oracle import exhaustive_best, point_cycles


def pooled(strides):
    rows = [{"kind": "conv", "kernel": 3, "out": 4}]
    for s in strides:
        rows += [{"kind": "pool", "kernel": 2, "stride": s}, {"kind": "conv", "kernel": 3, "out": 4}]
    return build_tenant("p", (64, 64, 1), rows)


def test_duplicate_identity_at_one():
    t = load_preset("VGG16")
    assert duplicate(t, Fraction(1)) == [classic_duplication(t, i) for i in range(len(t.flat_layers))]


def test_duplicate_halves():
    t = pooled([2, 2, 2, 2, 2])
    convs = [i for i, layer in enumerate(t.flat_layers) if layer.kind == "conv"]
    assert [duplicate(t, Fraction(1))[i] for i in convs[:3]] == [32, 16, 8]
    assert [duplicate(t, Fraction(1, 2))[i] for i in convs[:3]] == [16, 8, 4]


def test_duplicate_floor_at_one():
    t = pooled([2, 2, 2, 2, 2])
    assert duplicate(t, Fraction(1, 32))[0] == 1
    assert min(duplicate(t, Fraction(1, 32))) == 1


def test_round_half_up():
    t = pooled([2, 3])  # base 6 for the first conv
    assert duplicate(t, Fraction(1, 4))[0] == 2  # 1.5 rounds up


@given(st.lists(st.sampled_from([1, 2, 3]), max_size=5), st.fractions(Fraction(1, 64), 1))
def test_duplicate_monotone(strides, alpha):
    t = pooled(strides)
    lower = duplicate(t, alpha / 2)
    upper = duplicate(t, alpha)
    assert all(a <= b for a, b in zip(lower, upper))


def fp(row_slices, col_slices, rows=None, array_rows=128):
    rows = rows if rows is not None else row_slices * array_rows
    return Footprint(rows, col_slices * array_rows, row_slices, col_slices)


def test_split_bands(chip1):
    pieces = split(fp(5, 4, rows=576), 8, chip1[0])
    assert [p.arrays for p in pieces] == [8, 8, 4]
    assert [p.rows for p in pieces] == [256, 256, 64]


def test_split_identity(chip1):
    f = fp(5, 4)
    assert split(f, INF, chip1[0]) == [f]
    assert split(fp(2, 2), 4, chip1[0]) == [fp(2, 2)]


def test_split_too_fine(chip1):
    with pytest.raises(InfeasibleBetaError):
        split(fp(5, 4), 3, chip1[0])


@given(st.integers(1, 40), st.integers(1, 6), st.integers(1, 64), st.integers(1, 128))
def test_split_conservation(row_slices, col_slices, beta, tail):
    chip = ChipTopology(4)
    rows = (row_slices - 1) * 128 + tail
    f = Footprint(rows, col_slices * 128, row_slices, col_slices)
    try:
        pieces = split(f, beta, chip)
    except InfeasibleBetaError:
        assert col_slices > beta
        return
    assert sum(p.rows for p in pieces) == rows
    assert sum(p.arrays for p in pieces) == f.arrays
    assert all(p.arrays <= beta for p in pieces) or pieces == [f]
    assert all(p.rows % 128 == 0 for p in pieces[:-1])


def test_parse_tokens():
    assert parse_alpha("1/32") == Fraction(1, 32)
    assert parse_beta("inf") == INF
    assert parse_beta("8") == 8
    for bad in ("0", "3/2"):
        with pytest.raises(ValueError):
            parse_alpha(bad)
    with pytest.raises(ValueError):
        parse_beta("0.5")


def test_grid_always_has_classic_point():
    g = Grid.of(["1/2"], [4])
    assert CLASSIC in g.points()
    assert DEFAULT_GRID.alphas[0] == Fraction(1, 32)
    assert len(DEFAULT_GRID.points()) == 42


def test_reoperator_ids_unique(chip1):
    chip, _ = chip1
    reops = build_reoperators(load_preset("VGG16"), ReconstructionParams(Fraction(1, 2), 256), chip, area=5000)
    assert len({r.id for r in reops}) == len(reops)
    assert max(r.arrays for r in reops) <= 256


def test_reops_never_exceed_area(chip1):
    chip, _ = chip1
    area = 5 * chip.arrays_per_tile
    reops = build_reoperators(load_preset("VGG16"), CLASSIC, chip, area=area)
    assert max(r.arrays for r in reops) <= area


def test_single_point_grid(chip1):
    chip, power = chip1
    t = load_preset("DNN3")
    result = processing_time(t, 2000, chip, power, CLASSIC_GRID)
    assert result.best_params == CLASSIC
    assert result.best_time == evaluate_point(t, 2000, CLASSIC, chip, power)[1]


def test_small_grid_matches_oracle(chip1):
    chip, power = chip1
    t = load_preset("DNN1")
    grid = Grid.of(["1/4", "1"], [32, "inf"])
    result = processing_time(t, 40 * chip.arrays_per_tile, chip, power, grid)
    alpha, beta, cycles = exhaustive_best(t, 40 * chip.arrays_per_tile, grid.alphas, grid.betas, chip)
    assert (result.best_params.alpha, result.best_params.beta, result.best_time.cycles) == (alpha, beta, cycles)
    feasible = [e.cycles for e in result.evaluated if e.cycles is not None]
    assert result.best_time.cycles == min(feasible)


def test_point_matches_oracle_on_presets(chip2):
    chip, power = chip2
    for name in ("DNN2", "DNN4", "VGG13"):
        t = load_preset(name)
        for params in DEFAULT_GRID.points()[::5]:
            area = 30 * chip.arrays_per_tile
            expected = point_cycles(t, area, params.alpha, params.beta, chip)
            try:
                got = evaluate_point(t, area, params, chip, power)[1].cycles
            except InfeasibleError:
                got = None
            assert got == expected


def test_never_worse_than_classic(chip1):
    chip, power = chip1
    for name in ("DNN1", "VGG11"):
        t = load_preset(name)
        for tiles in (3, 20, 56):
            area = tiles * chip.arrays_per_tile
            best = processing_time(t, area, chip, power).best_time.cycles
            assert best <= evaluate_point(t, area, CLASSIC, chip, power)[1].cycles


def test_all_points_infeasible(chip1):
    chip, power = chip1
    t = load_preset("VGG16")
    with pytest.raises(InfeasibleError):
        processing_time(t, 100, chip, power)


def test_minimum_area(chip1):
    chip, _ = chip1
    assert minimum_area(load_preset("VGG16"), chip) == 256  # fc-4096 band: 4096*8/128
    assert minimum_area(load_preset("DNN1"), chip) == 32


def test_tie_break_prefers_small_alpha_then_large_beta():
    chip = ChipTopology(4, 1, 1, 8, 8, 2, 2)
    power = PowerModel()
    t = build_tenant("flat", (1, 1, 1), [{"kind": "fc", "out": 1}])
    result = processing_time(t, 4, chip, power, Grid.of(["1/4", "1/2", "1"], [1, 2, "inf"]))
    assert result.best_params == ReconstructionParams(Fraction(1, 4), INF)


@settings(max_examples=40, deadline=None)
@given(st.integers(0, 10**6))
def test_grid_search_oracle_property(seed):
    rng = random.Random(seed)
    chip = random_chip(rng)
    t = random_tenant(rng)
    power = PowerModel()
    low = max(1, minimum_area(t, chip))
    if low > chip.total_arrays:
        return
    area = rng.randint(low, chip.total_arrays)
    grid = Grid.of(rng.sample(["1/8", "1/4", "1/2"], 2), rng.sample([1, 2, 4, 8, 16], 2))
    result = processing_time(t, area, chip, power, grid)
    alpha, beta, cycles = exhaustive_best(t, area, grid.alphas, grid.betas, chip)
    assert result.best_time.cycles == cycles
    assert (result.best_params.alpha, result.best_params.beta) == (alpha, beta)
