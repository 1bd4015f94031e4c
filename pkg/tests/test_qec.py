from __future__ import annotations

import itertools

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from nvaxy.dynamics import ControlErrorModel, calibrate_noise, unitary_superoperator
from nvaxy.qec import (
    DIM,
    ERROR_LABELS,
    TWO_DESIGN_STATES,
    DegenerateCodeError,
    ErrorChannel,
    GateSet,
    ProtocolConfig,
    RepetitionCode,
    apply_error_channel,
    average_correction_fidelity,
    build_encoding,
    compose_iswap,
    derive_syndrome_table,
    electron_rotation,
    iswap_direct,
    pauli_string,
    qec_report,
    run_protocol,
    single_error_probability,
    sweep,
)
from nvaxy.register import embed

from .conftest import random_density

ERRORS = ControlErrorModel(2 * np.pi * 350, 0.0025)


def ideal_average_fidelity(p):
    """Exact 2-design average from the weight distribution of the Z errors.

    Weight 0 and 1 are corrected; every weight-2 and weight-3 pattern leaves a
    logical Pauli on the electron, whose state-averaged fidelity is 1/3.
    """
    total = 0.0
    for bits in itertools.product((0, 1), repeat=3):
        w = sum(bits)
        prob = p**w * (1 - p) ** (3 - w)
        total += prob * (1.0 if w <= 1 else 1.0 / 3.0)
    return total


@pytest.fixture(scope="module")
def simulated_gates(reg):
    return GateSet(reg, "simulated", {0: 15, 1: 30}, errors=ERRORS)


# ---------------------------------------------------------------------------
# error channel
# ---------------------------------------------------------------------------

def test_error_channel_validation():
    ErrorChannel(0.0), ErrorChannel(0.5)
    with pytest.raises(ValueError):
        ErrorChannel(0.6)
    with pytest.raises(ValueError):
        ErrorChannel(-0.1)
    assert ErrorChannel.from_rate(1.0, 0.0).p == 0.0
    assert ErrorChannel.from_rate(1.0, 1e9).p == pytest.approx(0.5)
    assert single_error_probability(0.1) == pytest.approx(3 * 0.1 * 0.81)


@settings(max_examples=50, deadline=None)
@given(st.floats(0, 1), st.integers(0, 2**32 - 1))
def test_error_channel_trace_preserving_unital(p, seed):
    rho = random_density(np.random.default_rng(seed), DIM)
    out = apply_error_channel(rho, p)
    assert np.trace(out) == pytest.approx(1.0)
    assert np.allclose(out, out.conj().T)
    assert np.allclose(apply_error_channel(np.eye(DIM) / DIM, p), np.eye(DIM) / DIM)


def test_error_channel_half_kills_coherences(rng):
    rho = random_density(rng, DIM)
    out = apply_error_channel(rho, 0.5)
    assert np.allclose(out, np.diag(np.diag(rho)))


# ---------------------------------------------------------------------------
# gates
# ---------------------------------------------------------------------------

def test_pauli_string_parsing():
    assert np.allclose(pauli_string("1"), np.eye(8))
    xxx = pauli_string("X0X1X2")
    assert np.allclose(xxx @ xxx, np.eye(8))
    assert np.allclose(pauli_string("Z0Y1"), pauli_string("Z0") @ pauli_string("Y1"))


@pytest.mark.parametrize("j", [0, 1])
def test_composite_iswap_is_exact(reg, j):
    u = compose_iswap(reg, j)
    assert np.allclose(u, iswap_direct(j), atol=1e-12)
    assert np.allclose(u.conj().T @ u, np.eye(8), atol=1e-12)
    # iSWAP|1 0> = i|0 1> between electron and nucleus j
    src = np.zeros(8, complex)
    src[0b100] = 1.0  # electron in |1> (second basis state), nuclei |0>
    dst = np.zeros(8, complex)
    dst[0b010 if j == 0 else 0b001] = 1.0
    assert abs(np.vdot(dst, u @ src)) == pytest.approx(1.0)


def test_electron_rotation_sign_convention():
    x = electron_rotation("x")
    assert np.allclose(x @ x, embed({0: 1j * np.array([[0, 1], [1, 0]])}, 3))


def test_encoding_gates_commute(reg):
    gs = GateSet(reg, "ideal")
    a, b = gs.unitary(0, "x"), gs.unitary(1, "x")
    assert np.allclose(a @ b, b @ a, atol=1e-12)
    assert np.allclose(build_encoding(reg), b @ a)


def test_simulated_encoding_is_accurate(reg, simulated_gates):
    ideal = build_encoding(reg)
    sim = build_encoding(reg, simulated_gates)
    # two gates of ~0.9986 each
    assert abs(np.trace(ideal.conj().T @ sim)) ** 2 / 64 > 0.997
    for j in (0, 1):
        u = simulated_gates.unitary(j, "x")
        assert abs(np.trace(GateSet(reg).unitary(j, "x").conj().T @ u)) ** 2 / 64 > 0.998


def test_gate_set_needs_two_nuclei(reg):
    from nvaxy.register import SpinRegister

    with pytest.raises(ValueError):
        GateSet(SpinRegister(reg.nuclei[:1], reg.B_field))


# ---------------------------------------------------------------------------
# syndrome table
# ---------------------------------------------------------------------------

def test_derived_syndrome_table(reg):
    table = derive_syndrome_table(build_encoding(reg))
    rows = {e.error: (e.decoded, e.syndrome, e.recovery) for e in table.entries}
    assert table.storage_frame == "y"
    assert rows == {
        "1": ("1", (0, 0), "1"),
        "Z0": ("X0X1X2", (1, 1), "X0"),
        "Z1": ("Z0Y1", (1, 0), "Z0"),
        "Z2": ("Z0Y2", (0, 1), "Z0"),
    }
    assert len({r[1] for r in rows.values()}) == 4


def test_degenerate_frame_is_rejected(reg):
    with pytest.raises(DegenerateCodeError):
        derive_syndrome_table(build_encoding(reg), candidates=("none",))


@pytest.mark.parametrize("label", ERROR_LABELS)
def test_single_injected_errors_are_corrected(reg, label):
    code = RepetitionCode(reg, ProtocolConfig())
    for psi in [*TWO_DESIGN_STATES, np.array([0.6, 0.8j])]:
        res = code.run(psi, label)
        assert res.fidelity > 1 - 1e-9
        # the syndrome is deterministic
        assert max(res.syndrome_probabilities.values()) == pytest.approx(1.0)


def test_double_errors_are_not_corrected(reg):
    code = RepetitionCode(reg, ProtocolConfig())
    fids = [code.run(psi, "Z1Z2").fidelity for psi in TWO_DESIGN_STATES]
    assert np.mean(fids) == pytest.approx(1 / 3)


# ---------------------------------------------------------------------------
# averaged protocol
# ---------------------------------------------------------------------------

@pytest.mark.parametrize("p", [0.0, 0.01, 0.05, 0.2, 0.5])
def test_ideal_average_matches_weight_oracle(reg, p):
    est = average_correction_fidelity(reg, ProtocolConfig(p=p))
    assert est.value == pytest.approx(ideal_average_fidelity(p), abs=1e-12)


def test_haar_average_agrees_with_two_design(reg):
    cfg = ProtocolConfig(p=0.1, averaging="haar", samples=4000, seed=7)
    haar = average_correction_fidelity(reg, cfg)
    exact = average_correction_fidelity(reg, ProtocolConfig(p=0.1))
    assert abs(haar.value - exact.value) < 3 * haar.stderr + 1e-12
    again = average_correction_fidelity(reg, cfg)
    assert again.value == haar.value


def test_haar_needs_two_samples(reg):
    with pytest.raises(ValueError, match="at least 2"):
        average_correction_fidelity(reg, ProtocolConfig(averaging="haar", samples=1))


def test_flip_error_variant(reg):
    cfg = ProtocolConfig(p=0.05, flip_errors=True)
    assert average_correction_fidelity(reg, cfg).value == pytest.approx(ideal_average_fidelity(0.05), abs=1e-12)
    code = RepetitionCode(reg, cfg)
    for label in ("X0", "X1", "X2"):
        assert code.run([0.6, 0.8], label).fidelity > 1 - 1e-9


def test_syndrome_probabilities_sum_to_one(reg):
    res = run_protocol(reg, ProtocolConfig(p=0.2), [0.6, 0.8])
    assert sum(res.syndrome_probabilities.values()) == pytest.approx(1.0)
    assert np.trace(res.rho_out) == pytest.approx(1.0)


def test_simulated_gates_protocol(reg, simulated_gates):
    f0 = average_correction_fidelity(reg, ProtocolConfig(gates=simulated_gates, p=0.0)).value
    f5 = average_correction_fidelity(reg, ProtocolConfig(gates=simulated_gates, p=0.05)).value
    assert 0.99 < f0 <= 1.0
    assert f5 < f0
    assert f5 > 0.99


def test_t1_noise_costs_little(reg):
    noise = calibrate_noise(1.0, 77.0, reg.transition_frequency, reg.constants)
    reps = {0: 15, 1: 30}
    clean = GateSet(reg, "simulated", reps, errors=ERRORS)
    noisy = GateSet(reg, "simulated", reps, errors=ERRORS, noise=noise)
    a = average_correction_fidelity(reg, ProtocolConfig(gates=clean, p=0.05)).value
    b = average_correction_fidelity(reg, ProtocolConfig(gates=noisy, p=0.05)).value
    assert b <= a + 1e-12
    assert a - b < 5e-3


def test_channel_superoperator_consistency(reg):
    gs = GateSet(reg, "ideal")
    assert np.allclose(gs.channel(0, "y", -1), unitary_superoperator(gs.unitary(0, "y", -1)))


def test_report_and_sweep(reg):
    rep = qec_report(reg, ProtocolConfig(p=0.05), echo={"p": 0.05})
    js = rep.to_json()
    assert js["syndrome_table"]["storage_frame"] == "y"
    assert sum(js["syndrome_probabilities"].values()) == pytest.approx(1.0)
    assert js["average_fidelity"] == pytest.approx(ideal_average_fidelity(0.05))
    rows = sweep(reg, [0.0, 0.1])
    assert [r["average_fidelity"] for r in rows] == pytest.approx([1.0, ideal_average_fidelity(0.1)])
