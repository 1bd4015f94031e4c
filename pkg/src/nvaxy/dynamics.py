"""Unitary and Lindblad propagation of the register through a pulse schedule.

Simulations run in the frame rotating with the microwave drive, with the
rotating-wave approximation applied to the drive.  Between pulses the
Hamiltonian is the register Hamiltonian plus the static detuning term
``m_s Delta_MW / 2 sigma_z``; during a pulse of phase ``phi`` the drive term
``Omega (1 + R_rfe) / 2 (cos phi sigma_x + sin phi sigma_y)`` is added, so a
nominal pulse of width ``pi / Omega`` is a pi rotation.

Density matrices are vectorised row-major (``rho.reshape(-1)``), for which
``vec(A rho B) = (A kron B^T) vec(rho)``.
"""

from __future__ import annotations

import logging
from dataclasses import dataclass
from typing import Iterator

import numpy as np
from numpy.typing import NDArray
from scipy.linalg import expm

from .pulses import PulseSchedule
from .register import (
    SIGMA_X,
    SIGMA_Y,
    SIGMA_Z,
    PhysicalConstants,
    SpinRegister,
    electron_operator,
    free_nuclear_hamiltonian,
    system_hamiltonian,
)

log = logging.getLogger(__name__)

SIGMA_MINUS = np.array([[0, 0], [1, 0]], dtype=complex)  # |m_s> -> |0> in (|m_s>, |0>)
SIGMA_PLUS = SIGMA_MINUS.conj().T


class CalibrationError(ValueError):
    """Noise model cannot be calibrated (e.g. zero temperature)."""


class PositivityWarning(RuntimeWarning):
    pass


@dataclass(frozen=True)
class ControlErrorModel:
    """Static microwave detuning (rad/s) and relative Rabi-frequency error."""

    detuning: float = 0.0
    rabi_error: float = 0.0

    def __post_init__(self):
        if not (np.isfinite(self.detuning) and np.isfinite(self.rabi_error)):
            raise ValueError("control errors must be finite")


@dataclass(frozen=True)
class NoiseModel:
    """Electron T1 relaxation calibrated to a measured rate.

    ``lam`` is the bare coupling; the decay rate is ``lam (1 + n)`` and the
    excitation rate ``lam n`` with ``n`` the Bose-Einstein occupation.
    """

    T1: float
    temperature: float
    omega_nv: float
    lam: float
    n_thermal: float

    @property
    def decay_rate(self) -> float:
        return self.lam * (1.0 + self.n_thermal)

    @property
    def excitation_rate(self) -> float:
        return self.lam * self.n_thermal


def bose_einstein(omega: float, temperature: float, constants: PhysicalConstants | None = None) -> float:
    """Mean photon number ``1 / (exp(hbar omega / k_B T) - 1)``."""
    c = constants or PhysicalConstants()
    if temperature <= 0:
        return 0.0
    return float(1.0 / np.expm1(c.hbar * omega / (c.k_B * temperature)))


def calibrate_noise(
    T1: float,
    temperature: float,
    omega_nv: float,
    constants: PhysicalConstants | None = None,
) -> NoiseModel:
    """Choose ``lam`` such that ``lam * n(omega_nv, T) = 1 / T1``."""
    if not T1 > 0:
        raise CalibrationError("T1 must be positive")
    n = bose_einstein(omega_nv, temperature, constants)
    if not n > 0:
        raise CalibrationError(f"uncalibratable: thermal occupation is zero at T = {temperature} K")
    return NoiseModel(T1, temperature, omega_nv, (1.0 / T1) / n, n)


# ---------------------------------------------------------------------------
# validation helpers
# ---------------------------------------------------------------------------

def check_unitary(u: NDArray, atol: float = 1e-9) -> None:
    dev = np.max(np.abs(u.conj().T @ u - np.eye(u.shape[0])))
    if dev > atol:
        raise ValueError(f"matrix is not unitary (max deviation {dev:.2e})")


def check_density(rho: NDArray, atol: float = 1e-9) -> None:
    if rho.ndim != 2 or rho.shape[0] != rho.shape[1]:
        raise ValueError("density matrix must be square")
    if abs(np.trace(rho) - 1) > atol:
        raise ValueError(f"density matrix trace {np.trace(rho).real:.12g} != 1")
    if np.max(np.abs(rho - rho.conj().T)) > atol:
        raise ValueError("density matrix is not Hermitian")
    if np.min(np.linalg.eigvalsh((rho + rho.conj().T) / 2)) < -atol:
        raise ValueError("density matrix has negative eigenvalues")


# ---------------------------------------------------------------------------
# segments
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class Segment:
    """A piece of constant Hamiltonian: ``drive`` is ``None`` for free evolution."""

    duration: float
    drive: tuple[float, float] | None = None  # (phase, amplitude)
    kick: bool = False  # zero-duration ideal rotation


def segments(schedule: PulseSchedule) -> Iterator[Segment]:
    """Split ``schedule`` into free-evolution, pulse and kick segments."""
    t = 0.0
    for p in schedule.pulses:
        if p.start > t:
            yield Segment(p.start - t, None)
        if schedule.instantaneous or p.duration == 0:
            yield Segment(0.0, (p.phase, p.amplitude), kick=True)
        else:
            yield Segment(p.duration, (p.phase, p.amplitude))
        t = max(t, p.end)
    if schedule.total_duration > t:
        yield Segment(schedule.total_duration - t, None)


def _drive_operator(phase: float, n_nuclei: int) -> NDArray:
    return electron_operator(np.cos(phase) * SIGMA_X + np.sin(phase) * SIGMA_Y, n_nuclei) / 2.0


class _Exponentiator:
    """Caches eigendecompositions of the few distinct segment Hamiltonians."""

    def __init__(self, register: SpinRegister, errors: ControlErrorModel):
        n = register.n_nuclei
        self.n = n
        self.errors = errors
        self.h0 = system_hamiltonian(register) + register.m_s * errors.detuning / 2.0 * electron_operator(
            SIGMA_Z, n
        )
        self._eig: dict = {}

    def hamiltonian(self, drive) -> NDArray:
        if drive is None:
            return self.h0
        phase, amp = drive
        return self.h0 + amp * (1.0 + self.errors.rabi_error) * _drive_operator(phase, self.n)

    def kick(self, drive) -> NDArray:
        phase, _ = drive
        angle = np.pi * (1.0 + self.errors.rabi_error)
        return expm(-1j * angle * _drive_operator(phase, self.n))

    def unitary(self, seg: Segment) -> NDArray:
        if seg.kick:
            return self.kick(seg.drive)
        key = None if seg.drive is None else (round(seg.drive[0], 12), seg.drive[1])
        if key not in self._eig:
            h = self.hamiltonian(seg.drive)
            if np.max(np.abs(h - h.conj().T)) > 1e-9 * max(1.0, np.max(np.abs(h))):
                raise AssertionError("segment Hamiltonian is not Hermitian")
            self._eig[key] = np.linalg.eigh(h)
        w, v = self._eig[key]
        return (v * np.exp(-1j * w * seg.duration)) @ v.conj().T


def propagate_unitary(
    register: SpinRegister,
    schedule: PulseSchedule,
    errors: ControlErrorModel | None = None,
) -> NDArray[np.complex128]:
    """Time-ordered product of segment propagators ``exp(-i H_seg dt)``."""
    ex = _Exponentiator(register, errors or ControlErrorModel())
    u = np.eye(register.dim, dtype=complex)
    for seg in segments(schedule):
        u = ex.unitary(seg) @ u
    return u


def free_propagator(register: SpinRegister, t: float) -> NDArray[np.complex128]:
    """Free nuclear precession ``exp(-i t H_free)`` (diagonal in the frame basis)."""
    return expm(-1j * t * free_nuclear_hamiltonian(register))


def to_interaction_picture(register: SpinRegister, u: NDArray, t: float) -> NDArray:
    """Remove the free nuclear precession accumulated over ``t``."""
    return free_propagator(register, t).conj().T @ u


# ---------------------------------------------------------------------------
# Lindblad
# ---------------------------------------------------------------------------

def unitary_superoperator(u: NDArray) -> NDArray:
    return np.kron(u, u.conj())


def liouvillian(h: NDArray, jumps: list[tuple[float, NDArray]]) -> NDArray:
    """GKSL generator ``-i[H, .] + sum_k r_k (L rho L^+ - 1/2 {L^+ L, rho})``."""
    d = h.shape[0]
    eye = np.eye(d)
    L = -1j * (np.kron(h, eye) - np.kron(eye, h.T))
    for rate, op in jumps:
        if rate == 0:
            continue
        ldl = op.conj().T @ op
        L += rate * (np.kron(op, op.conj()) - 0.5 * np.kron(ldl, eye) - 0.5 * np.kron(eye, ldl.T))
    return L


def t1_jumps(register: SpinRegister, noise: NoiseModel) -> list[tuple[float, NDArray]]:
    n = register.n_nuclei
    return [
        (noise.decay_rate, electron_operator(SIGMA_MINUS, n)),
        (noise.excitation_rate, electron_operator(SIGMA_PLUS, n)),
    ]


def lindblad_superoperator(
    register: SpinRegister,
    schedule: PulseSchedule,
    errors: ControlErrorModel | None,
    noise: NoiseModel | None,
) -> NDArray[np.complex128]:
    """Propagator superoperator of the schedule (row-major vectorisation)."""
    ex = _Exponentiator(register, errors or ControlErrorModel())
    jumps = t1_jumps(register, noise) if noise is not None else []
    dim = register.dim
    gens: dict = {}
    cache: dict = {}
    s = np.eye(dim * dim, dtype=complex)
    for seg in segments(schedule):
        if seg.kick:
            key = ("kick", round(seg.drive[0], 12))
            if key not in cache:
                cache[key] = unitary_superoperator(ex.kick(seg.drive))
        else:
            hkey = None if seg.drive is None else round(seg.drive[0], 12)
            if hkey not in gens:
                gens[hkey] = liouvillian(ex.hamiltonian(seg.drive), jumps)
            # durations repeat across periods up to float rounding
            key = (hkey, round(seg.duration * 1e18))
            if key not in cache:
                cache[key] = expm(gens[hkey] * (key[1] * 1e-18))
        s = cache[key] @ s
    return s


def apply_superoperator(s: NDArray, rho: NDArray) -> NDArray:
    d = rho.shape[0]
    return (s @ rho.reshape(-1)).reshape(d, d)


def propagate_lindblad(
    register: SpinRegister,
    schedule: PulseSchedule,
    errors: ControlErrorModel | None,
    noise: NoiseModel | None,
    rho0: NDArray,
    positivity_tol: float = 1e-9,
) -> NDArray[np.complex128]:
    """Evolve ``rho0`` under the schedule with electron T1 dissipation.

    A negative eigenvalue below ``-positivity_tol`` in the result is logged as
    a positivity violation.
    """
    rho0 = np.asarray(rho0, dtype=complex)
    if rho0.shape != (register.dim, register.dim):
        raise ValueError(f"rho0 has shape {rho0.shape}, expected {(register.dim,) * 2}")
    check_density(rho0)
    rho = apply_superoperator(lindblad_superoperator(register, schedule, errors, noise), rho0)
    rho = (rho + rho.conj().T) / 2
    lowest = np.min(np.linalg.eigvalsh(rho))
    if lowest < -positivity_tol:
        log.warning("positivity violation: smallest eigenvalue %.3e", lowest)
    return rho


def thermal_electron_state(noise: NoiseModel) -> NDArray:
    """Steady state of the T1 dissipator on the electron alone (basis ``(|m_s>, |0>)``)."""
    n = noise.n_thermal
    p_exc = n / (1.0 + 2.0 * n)
    return np.diag([p_exc, 1.0 - p_exc]).astype(complex)


def trajectory(
    register: SpinRegister,
    schedule: PulseSchedule,
    errors: ControlErrorModel | None,
    observables: dict[str, NDArray],
    rho0: NDArray,
) -> list[dict[str, float]]:
    """Unitary trajectory sampled at segment boundaries: ``[{t, name: <O>}, ...]``."""
    ex = _Exponentiator(register, errors or ControlErrorModel())
    rho = np.asarray(rho0, dtype=complex)
    t = 0.0
    rows = [{"t": 0.0, **{k: float(np.real(np.trace(o @ rho))) for k, o in observables.items()}}]
    for seg in segments(schedule):
        u = ex.unitary(seg)
        rho = u @ rho @ u.conj().T
        t += seg.duration
        rows.append({"t": t, **{k: float(np.real(np.trace(o @ rho))) for k, o in observables.items()}})
    return rows
