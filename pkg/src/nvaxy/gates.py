"""Electron-nuclear conditional rotations generated by AXY sequences.

The target gate on nucleus ``n`` is ``A^x_n(theta) = exp(-i theta sigma_z I_n^x)``
(``I_n^y`` for odd sequences).  An AXY-8 train of ``N`` repetitions on
resonance (``k_DD * 2 pi / tau = omega_n``) lasts ``T = 4 tau N`` and rotates
at the rate ``m_s f g_n / 4``, hence ``theta = m_s f g_n N tau``.

Off-resonant spectators are scored by the decoupling efficiency ``D_j``,
and the product of all ``D_j`` predicts the gate fidelity.
"""

from __future__ import annotations

import logging
from dataclasses import dataclass
from typing import Iterable, Literal, Sequence

import numpy as np
from numpy.typing import ArrayLike, NDArray

from .dynamics import ControlErrorModel, NoiseModel, lindblad_superoperator, propagate_unitary
from .dynamics import free_propagator, unitary_superoperator
from .pulses import (
    AxySequenceSpec,
    ORDER,
    OverlapError,
    UnreachableCoefficientError,
    attainable_interval,
    build_schedule,
    solve_axy_positions,
)
from .register import PAULI, SpinRegister, derive_frames, embed

log = logging.getLogger(__name__)

Axis = Literal["x", "y"]


class ResonanceError(ValueError):
    """Sequence period is not resonant with the target nucleus."""


class InfeasibleTargetError(RuntimeError):
    """No repetition number reaches the requested fidelity."""

    def __init__(self, message: str, best: GateTimeResult | None = None):
        super().__init__(message)
        self.best = best


@dataclass(frozen=True)
class GateSpec:
    """Conditional rotation by ``angle`` about ``axis`` of nucleus ``target``."""

    target: int
    axis: Axis = "x"
    angle: float = np.pi / 2

    def __post_init__(self):
        if self.axis not in ("x", "y"):
            raise ValueError(f"invalid axis {self.axis!r}")
        if self.target < 0:
            raise ValueError("invalid target index")

    @property
    def parity(self) -> str:
        return "even" if self.axis == "x" else "odd"


def _check_target(register: SpinRegister, spec: GateSpec) -> None:
    if not 0 <= spec.target < register.n_nuclei:
        raise ValueError(f"target {spec.target} out of range for {register.n_nuclei} nuclei")


def ideal_gate(register: SpinRegister | int, spec: GateSpec) -> NDArray[np.complex128]:
    """``exp(-i theta sigma_z I_n^axis)`` in the frame basis, identity elsewhere.

    ``register`` may also be a bare number of nuclei.
    """
    n = register if isinstance(register, int) else register.n_nuclei
    if not 0 <= spec.target < n:
        raise ValueError(f"target {spec.target} out of range for {n} nuclei")
    zs = embed({0: PAULI["z"], spec.target + 1: PAULI[spec.axis]}, n + 1)
    half = spec.angle / 2
    return np.cos(half) * np.eye(2 ** (n + 1)) - 1j * np.sin(half) * zs


def gate_fidelity(u: NDArray, u_id: NDArray) -> float:
    """``|Tr(U_id^+ U)| / sqrt(Tr(U_id^+ U_id) Tr(U^+ U))``."""
    u = np.asarray(u)
    u_id = np.asarray(u_id)
    if u.shape != u_id.shape:
        raise ValueError(f"dimension mismatch {u.shape} vs {u_id.shape}")
    num = abs(np.trace(u_id.conj().T @ u))
    den = np.sqrt(np.trace(u_id.conj().T @ u_id).real * np.trace(u.conj().T @ u).real)
    return float(num / den)


def decoupling_efficiency(vartheta: ArrayLike, g_ratio: ArrayLike, phi: ArrayLike) -> NDArray | float:
    """``|cos v cos mu + (v / mu) sin v sin mu|`` with ``mu = sqrt(v^2 + (g_ratio phi / 2)^2)``.

    ``vartheta = Delta_j T / 2`` is the rescaled spectator detuning, ``g_ratio``
    is ``g_j / g_n`` and ``phi`` the target rotation angle.
    """
    v = np.asarray(vartheta, dtype=float)
    c = np.asarray(g_ratio, dtype=float) * np.asarray(phi, dtype=float) / 2.0
    mu = np.sqrt(v * v + c * c)
    # v sin(mu) / mu -> v at mu = 0
    ratio = v * np.sinc(mu / np.pi)
    out = np.abs(np.cos(v) * np.cos(mu) + ratio * np.sin(v))
    return float(out) if out.ndim == 0 else out


# ---------------------------------------------------------------------------
# sequence parameters
# ---------------------------------------------------------------------------

def repetition_length(variant: str = "AXY8") -> int:
    """Number of ``tau`` periods per repetition (4 for AXY-8, 2 for AXY-4)."""
    return len(ORDER[variant]) // 2


def resonant_tau(register: SpinRegister, target: int, k_dd: int = 1) -> float:
    """``tau = 2 pi k_DD / omega_n``."""
    return 2 * np.pi * k_dd / derive_frames(register)[target].omega


def required_f(
    register: SpinRegister, spec: GateSpec, N: int, tau: float, variant: str = "AXY8"
) -> float:
    """Fourier coefficient giving ``spec.angle`` after ``N`` repetitions."""
    g = derive_frames(register)[spec.target].g
    T = repetition_length(variant) * tau * N
    return 4.0 * spec.angle / (register.m_s * g * T)


def minimum_gate_time(register: SpinRegister, spec: GateSpec, k_dd: int = 1) -> float:
    """``T_min = |theta| / (g_n f_max / 4)``: the rotation at the largest attainable
    coefficient, ignoring spectral selectivity."""
    g = derive_frames(register)[spec.target].g
    f_max = attainable_interval(k_dd)[1]
    return abs(spec.angle) / (g * f_max / 4.0)


def predicted_fidelity(
    register: SpinRegister,
    spec: GateSpec,
    N: int,
    tau: float,
    k_dd: int = 1,
    variant: str = "AXY8",
    rtol: float = 1e-9,
) -> float:
    """Product of spectator decoupling efficiencies at ``T = 4 tau N``.

    Raises
    ------
    ResonanceError
        If ``k_dd 2 pi / tau`` differs from ``omega_n`` by more than ``rtol``.
    """
    _check_target(register, spec)
    frames = derive_frames(register)
    n = spec.target
    tau_res = resonant_tau(register, n, k_dd)
    if abs(tau - tau_res) > rtol * tau_res:
        raise ResonanceError(f"resonance mismatch: tau = {tau:.9e} s, required {tau_res:.9e} s")
    T = repetition_length(variant) * tau * N
    fid = 1.0
    for j, fr in enumerate(frames):
        if j == n:
            continue
        delta = fr.omega - frames[n].omega
        fid *= decoupling_efficiency(delta * T / 2.0, fr.g / frames[n].g, spec.angle)
    return float(fid)


def high_field_margin(register: SpinRegister, k_dd: int = 1) -> float:
    """``min_j |gamma_j B| / |k_DD g_j|``."""
    frames = derive_frames(register)
    return min(
        abs(nuc.gyromagnetic_ratio * register.B_field) / abs(k_dd * fr.g)
        for nuc, fr in zip(register.nuclei, frames)
    )


def coupling_limit_ratio(
    register: SpinRegister, spec: GateSpec, N: int, k_dd: int = 1, variant: str = "AXY8"
) -> float:
    """``min_{j != n} |omega_j - omega_n| / |f g_j|`` at repetition number ``N``.

    The weak-coupling (RWA) picture needs this ratio to be large; points where
    it is of order one are the ones the decoupling-efficiency model recovers.
    Returns ``inf`` for a single nucleus.
    """
    _check_target(register, spec)
    frames = derive_frames(register)
    n = spec.target
    f = required_f(register, spec, N, resonant_tau(register, n, k_dd), variant)
    ratios = [abs(fr.omega - frames[n].omega) / abs(f * fr.g) for j, fr in enumerate(frames) if j != n]
    return float(min(ratios, default=np.inf))


def sequence_for_gate(
    register: SpinRegister,
    spec: GateSpec,
    N: int,
    k_dd: int = 1,
    rabi: float = 2 * np.pi * 20e6,
    variant: str = "AXY8",
    tau: float | None = None,
) -> AxySequenceSpec:
    """AXY sequence realising ``spec`` with ``N`` repetitions (resonant by default)."""
    _check_target(register, spec)
    tau_res = resonant_tau(register, spec.target, k_dd)
    tau = tau_res if tau is None else tau
    # the coefficient always follows the resonant rotation rate
    f = required_f(register, spec, N, tau_res, variant)
    layout = solve_axy_positions(f, k_dd, spec.parity)
    return AxySequenceSpec(layout=layout, tau=tau, repetitions=N, rabi=rabi, variant=variant)


def simulate_gate(
    register: SpinRegister,
    sequence: AxySequenceSpec,
    errors: ControlErrorModel | None = None,
    instantaneous: bool = False,
) -> NDArray[np.complex128]:
    """Full unitary of the sequence with the free nuclear precession removed."""
    schedule = build_schedule(sequence, instantaneous=instantaneous)
    u = propagate_unitary(register, schedule, errors)
    return free_propagator(register, schedule.total_duration).conj().T @ u


def simulate_gate_channel(
    register: SpinRegister,
    sequence: AxySequenceSpec,
    errors: ControlErrorModel | None = None,
    noise: NoiseModel | None = None,
    instantaneous: bool = False,
) -> NDArray[np.complex128]:
    """Superoperator of the sequence (free nuclear precession removed)."""
    schedule = build_schedule(sequence, instantaneous=instantaneous)
    s = lindblad_superoperator(register, schedule, errors, noise)
    u0 = free_propagator(register, schedule.total_duration)
    return unitary_superoperator(u0.conj().T) @ s


def simulated_fidelity(
    register: SpinRegister,
    spec: GateSpec,
    N: int,
    errors: ControlErrorModel | None = None,
    k_dd: int = 1,
    rabi: float = 2 * np.pi * 20e6,
    variant: str = "AXY8",
    tau: float | None = None,
    instantaneous: bool = False,
) -> float:
    seq = sequence_for_gate(register, spec, N, k_dd, rabi, variant, tau)
    u = simulate_gate(register, seq, errors, instantaneous)
    return gate_fidelity(u, ideal_gate(register, spec))


# ---------------------------------------------------------------------------
# optimisation
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class GateTimeResult:
    N: int
    tau: float
    f_kdd: float
    predicted_fidelity: float
    total_time: float
    t_min: float

    @property
    def time_ratio(self) -> float:
        return self.total_time / self.t_min


def optimize_gate_time(
    register: SpinRegister,
    spec: GateSpec,
    target_fidelity: float,
    n_max: int = 200,
    k_dd: int = 1,
    variant: str = "AXY8",
) -> GateTimeResult:
    """Smallest ``N`` whose predicted fidelity reaches ``target_fidelity``.

    The coefficient is rescaled as ``f ~ 1/N`` to keep the rotation angle; a
    repetition number is feasible only if that coefficient is attainable.

    Raises
    ------
    InfeasibleTargetError
        No ``N <= n_max`` qualifies; ``.best`` holds the best feasible point.
    """
    _check_target(register, spec)
    if not 0 <= target_fidelity < 1:
        raise ValueError("target fidelity must lie in [0, 1)")
    tau = resonant_tau(register, spec.target, k_dd)
    lo, hi = attainable_interval(k_dd)
    t_min = minimum_gate_time(register, spec, k_dd)
    best = None
    for N in range(1, n_max + 1):
        f = required_f(register, spec, N, tau, variant)
        if not lo < f < hi:
            continue
        fid = predicted_fidelity(register, spec, N, tau, k_dd, variant)
        res = GateTimeResult(N, tau, f, fid, repetition_length(variant) * tau * N, t_min)
        if fid >= target_fidelity:
            return res
        if best is None or fid > best.predicted_fidelity:
            best = res
    raise InfeasibleTargetError(
        f"infeasible target: no N <= {n_max} reaches F = {target_fidelity}"
        + (f" (best {best.predicted_fidelity:.6f} at N = {best.N})" if best else ""),
        best,
    )


@dataclass(frozen=True)
class ScanPoint:
    N: int
    tau: float
    f_kdd: float
    predicted_fidelity: float
    simulated_fidelity: float

    @property
    def infidelity(self) -> float:
        return 1.0 - self.simulated_fidelity


def scan_repetitions(
    register: SpinRegister,
    spec: GateSpec,
    repetitions: Iterable[int],
    errors: ControlErrorModel | None = None,
    k_dd: int = 1,
    rabi: float = 2 * np.pi * 20e6,
    variant: str = "AXY8",
    instantaneous: bool = False,
    tau_offsets: Sequence[float] = (0.0,),
) -> list[ScanPoint]:
    """Simulated and predicted fidelity over ``N`` (and optional ``tau`` detunings).

    Points with unattainable coefficients or overlapping finite-width pulses
    are skipped; off-resonant points report ``nan`` for the prediction.
    """
    tau_res = resonant_tau(register, spec.target, k_dd)
    points = []
    for N in repetitions:
        try:
            base = sequence_for_gate(register, spec, N, k_dd, rabi, variant)
        except UnreachableCoefficientError:
            continue
        for dt in tau_offsets:
            tau = tau_res * (1.0 + dt)
            seq = AxySequenceSpec(base.layout, tau, N, rabi, variant)
            try:
                u = simulate_gate(register, seq, errors, instantaneous)
            except OverlapError as exc:
                log.info("skipping N = %d: %s", N, exc)
                continue
            sim = gate_fidelity(u, ideal_gate(register, spec))
            pred = predicted_fidelity(register, spec, N, tau_res, k_dd, variant) if dt == 0 else float("nan")
            points.append(ScanPoint(N, tau, base.target_f, pred, sim))
    return points
