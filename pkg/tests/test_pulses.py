from __future__ import annotations

import csv
import json

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st
from scipy.integrate import quad

from nvaxy.pulses import (
    F_BOUND,
    AxySequenceSpec,
    OverlapError,
    UnreachableCoefficientError,
    attainable_interval,
    build_schedule,
    fourier_coefficients,
    modulation_function,
    schedule_report,
    solve_axy_positions,
    write_schedule,
)

from .conftest import quadrature_coefficients, sign_at

TAU = 1.45e-6


def test_no_pulses_gives_constant_modulation():
    a, b = fourier_coefficients([], 6)
    assert a[0] == 1.0
    assert np.all(a[1:] == 0) and np.all(b == 0)


def test_cpmg_first_harmonic():
    a, b = fourier_coefficients([0.25, 0.75], 3)
    assert a[1] == pytest.approx(4 / np.pi, abs=1e-14)
    assert abs(b[1]) < 1e-14


@settings(max_examples=25, deadline=None)
@given(st.lists(st.floats(0.001, 0.999), min_size=2, max_size=12, unique=True).filter(lambda v: len(v) % 2 == 0))
def test_fourier_coefficients_match_quadrature(pos):
    pos = np.sort(pos)
    if np.min(np.diff(pos)) < 1e-4:
        return
    a, b = fourier_coefficients(pos, 8)
    for k in range(1, 9):
        qa, qb = quadrature_coefficients(pos, k)
        assert abs(a[k] - qa) < 1e-10 and abs(b[k] - qb) < 1e-10
    mean = quad(lambda x: sign_at(pos, x), 0, 1, points=list(pos), limit=200)[0]
    assert a[0] == pytest.approx(mean, abs=1e-10)


def _check_layout(layout, f, k_dd, parity):
    a, b = fourier_coefficients(layout.period_positions(), 8)
    same, other = (a, b) if parity == "even" else (b, a)
    assert abs(same[k_dd] - f) < 1e-9
    for k in {0, 1, 2, 3, 4} - {k_dd}:
        assert abs(same[k]) < 1e-9
    assert np.max(np.abs(other)) < 1e-9


@settings(max_examples=100, deadline=None)
@given(st.floats(-1.0, 1.0, exclude_min=True, exclude_max=True),
       st.sampled_from([1, 3]), st.sampled_from(["even", "odd"]))
def test_solver_round_trip(frac, k_dd, parity):
    lo, hi = attainable_interval(k_dd)
    f = frac * hi * 0.999
    _check_layout(solve_axy_positions(f, k_dd, parity), f, k_dd, parity)


def test_round_trip_against_quadrature_near_bound():
    for f in (0.0, 1.0, -1.1, 1.119):
        layout = solve_axy_positions(f)
        qa, _ = quadrature_coefficients(layout.period_positions(), 1)
        assert abs(qa - f) < 1e-9
        assert abs(quadrature_coefficients(layout.period_positions(), 3)[0]) < 1e-9


def test_zero_target_is_decoupled_layout():
    layout = solve_axy_positions(0.0)
    a, _ = fourier_coefficients(layout.period_positions(), 4)
    assert np.max(np.abs(a[1:5])) < 1e-12


@pytest.mark.parametrize("f,k", [(1.15, 1), (-1.15, 1), (F_BOUND, 1), (1.3, 3)])
def test_unreachable_coefficient(f, k):
    with pytest.raises(UnreachableCoefficientError, match="unreachable coefficient"):
        solve_axy_positions(f, k)


def test_unsupported_harmonic():
    with pytest.raises(ValueError):
        solve_axy_positions(0.2, k_dd=2)


@settings(max_examples=15, deadline=None)
@given(st.floats(-1.1, 1.1))
def test_half_period_shift_negates_odd_harmonics(f):
    x = solve_axy_positions(f).period_positions()
    a, _ = fourier_coefficients(x, 5)
    grid = (np.arange(1000) + 0.37) / 1000
    # a layout with five flips per half period is antiperiodic
    assert np.array_equal(sign_at(x, np.mod(grid + 0.5, 1.0)), -sign_at(x, grid))
    for k in (1, 3, 5):
        shifted = 2 * quad(lambda s: sign_at(x, np.mod(s - 0.5, 1.0)) * np.cos(2 * np.pi * k * s), 0, 1,
                           points=list(np.mod(x + 0.5, 1.0)), limit=200, epsabs=1e-13)[0]
        assert abs(shifted + a[k]) < 1e-10


def test_instantaneous_schedule_counts():
    spec = AxySequenceSpec(solve_axy_positions(0.5), TAU, 1)
    sched = build_schedule(spec, instantaneous=True)
    assert len(sched.pulses) == 40
    assert all(p.duration == 0 for p in sched.pulses)
    assert sched.total_duration == pytest.approx(4 * TAU)
    spec4 = AxySequenceSpec(solve_axy_positions(0.5), TAU, 3, variant="AXY4")
    assert len(build_schedule(spec4, instantaneous=True).pulses) == 60


@pytest.mark.parametrize("f,parity", [(0.5, "even"), (-0.8, "even"), (0.7, "odd"), (-0.6, "odd")])
def test_finite_schedule_invariants(f, parity):
    spec = AxySequenceSpec(solve_axy_positions(f, 1, parity), TAU, 5)
    sched = build_schedule(spec)
    assert sched.total_duration == pytest.approx(4 * TAU * 5, rel=1e-12)
    for p in sched.pulses:
        assert p.amplitude * p.duration == pytest.approx(np.pi, rel=1e-12)
        assert 0 <= p.start and p.end <= sched.total_duration * (1 + 1e-12)
    starts = np.array([p.start for p in sched.pulses])
    ends = np.array([p.end for p in sched.pulses])
    assert np.all(starts[1:] >= ends[:-1])


def test_knill_phases_and_axy8_order():
    spec = AxySequenceSpec(solve_axy_positions(0.3), TAU, 1)
    phases = np.array([p.phase for p in build_schedule(spec, instantaneous=True).pulses]).reshape(8, 5)
    knill = np.array([np.pi / 6, 0, np.pi / 2, 0, np.pi / 6])
    for row, axis in zip(phases, "XYXYYXYX"):
        base = 0.0 if axis == "X" else np.pi / 2
        assert np.allclose(row, np.mod(base + knill, 2 * np.pi))


def test_low_rabi_near_bound_overlaps():
    spec = AxySequenceSpec(solve_axy_positions(1.1), TAU, 1, rabi=2 * np.pi * 1e6, max_width_ratio=1.0)
    with pytest.raises(OverlapError, match=r"pulses \d+ .* and \d+"):
        build_schedule(spec)


def test_non_instantaneous_width_rejected():
    spec = AxySequenceSpec(solve_axy_positions(0.0), TAU, 1, rabi=2 * np.pi * 5e6)
    with pytest.raises(ValueError, match="quasi-instantaneous"):
        build_schedule(spec)


def test_modulation_function_basics():
    spec = AxySequenceSpec(solve_axy_positions(0.5), TAU, 1)
    sched = build_schedule(spec, instantaneous=True)
    first = sched.pulses[0].start
    assert modulation_function(sched, 0.0) == 1.0
    assert modulation_function(sched, first * (1 + 1e-9)) == -1.0
    flips = [p.start for p in sched.pulses]
    integral = quad(lambda t: modulation_function(sched, t), 0, TAU, points=[f for f in flips if f < TAU],
                    limit=200)[0]
    assert abs(integral) < 1e-10 * TAU
    with pytest.raises(ValueError):
        modulation_function(sched, -1e-9)
    with pytest.raises(ValueError):
        modulation_function(sched, 2 * sched.total_duration)


def test_schedule_export(tmp_path):
    spec = AxySequenceSpec(solve_axy_positions(0.5), TAU, 2)
    sched = build_schedule(spec)
    report = schedule_report(spec)
    write_schedule(sched, tmp_path / "s.csv", report)
    rows = list(csv.reader(open(tmp_path / "s.csv")))
    assert rows[0] == ["start_s", "duration_s", "phase_rad", "amplitude_rad_per_s"]
    assert len(rows) == 1 + len(sched.pulses)
    meta = json.loads((tmp_path / "s.json").read_text())
    assert meta["max_abs_residual"] < 1e-9
    assert set(meta["residuals"]) == {"0", "1", "2", "3", "4", "6", "8"}
