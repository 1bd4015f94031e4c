"""Adaptive-XY (AXY) pulse positions and timed pulse schedules.

An AXY period of length ``tau`` holds two five-pulse Knill composites, each
of length ``tau / 2``.  Positions are expressed as fractions of ``tau``.  For
an even modulation function the first composite is symmetric about ``1/4``::

    x = 1/4 + (-b, -a, 0, a, b),     0 < a < b < 1/4

and the second composite is the first shifted by ``1/2``.  With that shape
all even harmonics and all sine coefficients vanish identically, and the odd
cosine coefficients are

    a_k = 4 / (pi k) (-1)^((k-1)/2) [1 + 2 T_k(cos 2 pi b) - 2 T_k(cos 2 pi a)]

with ``T_k`` the Chebyshev polynomials of the first kind.  Odd (sine)
modulation functions are the even ones advanced by a quarter period.
"""

from __future__ import annotations

import csv
import json
from dataclasses import dataclass
from pathlib import Path
from typing import Literal

import numpy as np
from numpy.typing import ArrayLike, NDArray

F_BOUND = (8.0 * np.cos(np.pi / 9.0) - 4.0) / np.pi
KNILL_PHASES = (np.pi / 6.0, 0.0, np.pi / 2.0, 0.0, np.pi / 6.0)
BASE_PHASE = {"X": 0.0, "Y": np.pi / 2.0}
ORDER = {"AXY4": "XYXY", "AXY8": "XYXYYXYX"}
MIN_GAP_FACTOR = 0.1  # edge-to-edge gap in pulse widths
MAX_WIDTH_RATIO = 0.05  # pulse width / tau

Parity = Literal["even", "odd"]


class UnreachableCoefficientError(ValueError):
    """Requested Fourier coefficient lies outside the attainable interval."""


class SolverError(RuntimeError):
    """Position solver did not converge."""


class OverlapError(ValueError):
    """Two finite-width pulses are closer than the minimum gap."""


# ---------------------------------------------------------------------------
# Fourier coefficients
# ---------------------------------------------------------------------------

def fourier_coefficients(positions: ArrayLike, k_max: int) -> tuple[NDArray, NDArray]:
    """Fourier coefficients of the +-1 modulation function with flips at ``positions``.

    ``F(x) = 1 + 2 sum_i (-1)^i Theta(x - x_i)`` on one period ``x in [0, 1]``.

    Returns
    -------
    a, b : ndarray, shape (k_max + 1,)
        Cosine and sine coefficients; ``a[0]`` is the mean of ``F``, ``b[0] = 0``.
    """
    x = np.sort(np.asarray(positions, dtype=float).ravel())
    if x.size and (x[0] < 0 or x[-1] > 1):
        raise ValueError("positions must lie in [0, 1]")
    a = np.zeros(k_max + 1)
    b = np.zeros(k_max + 1)
    sign = (-1.0) ** np.arange(1, x.size + 1)  # (-1)^i, i = 1..n
    a[0] = 1.0 + 2.0 * np.sum(sign * (1.0 - x))
    for k in range(1, k_max + 1):
        pref = 2.0 / (np.pi * k)
        a[k] = pref * np.sum(-sign * np.sin(2 * np.pi * k * x))
        b[k] = pref * np.sum(sign * (np.cos(2 * np.pi * k * x) - 1.0))
    return a, b


# ---------------------------------------------------------------------------
# position solver
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class CompositePulseLayout:
    """Positions of the five sub-pulses of the first composite (fractions of tau).

    ``positions`` always describe the even (cosine) layout centred on 1/4;
    ``parity='odd'`` advances the whole period by a quarter.
    """

    positions: tuple[float, float, float, float, float]
    parity: Parity = "even"
    k_dd: int = 1
    target_f: float = 0.0

    def __post_init__(self):
        x = tuple(float(v) for v in self.positions)
        if len(x) != 5:
            raise ValueError("a composite pulse has five sub-pulses")
        if not all(0.0 <= v <= 0.5 for v in x) or any(np.diff(x) <= 0):
            raise ValueError(f"positions must be strictly increasing in [0, 1/2]: {x}")
        if self.parity not in ("even", "odd"):
            raise ValueError(f"unknown parity {self.parity!r}")
        object.__setattr__(self, "positions", x)

    @property
    def offset(self) -> float:
        """Shift applied to the even layout (0 or -1/4 of a period)."""
        return 0.0 if self.parity == "even" else -0.25

    def period_positions(self) -> NDArray[np.float64]:
        """The ten flip positions of one period, sorted, in ``[0, 1)``."""
        x = np.asarray(self.positions)
        both = np.concatenate([x, x + 0.5]) + self.offset
        return np.sort(np.mod(both, 1.0))

    def min_gap(self) -> float:
        """Smallest distance between neighbouring flips, periodic in ``[0, 1)``."""
        p = self.period_positions()
        return float(np.min(np.diff(np.append(p, p[0] + 1.0))))


def _chebyshev_t(k: int, x: float) -> float:
    return float(np.polynomial.chebyshev.chebval(x, [0] * k + [1]))


def _layout_positions(a: float, b: float) -> NDArray[np.float64]:
    first = 0.25 + np.array([-b, -a, 0.0, a, b])
    return np.concatenate([first, first + 0.5])


def _residual(ab: NDArray, k_dd: int, other: int, target: float) -> NDArray:
    x = _layout_positions(*ab)
    sign = (-1.0) ** np.arange(2, 12)  # (-1)^(i+1)
    out = []
    for k, want in ((k_dd, target), (other, 0.0)):
        out.append(2.0 / (np.pi * k) * np.sum(sign * np.sin(2 * np.pi * k * x)) - want)
    return np.array(out)


def _jacobian(ab: NDArray, k_dd: int, other: int) -> NDArray:
    x = _layout_positions(*ab)
    sign = (-1.0) ** np.arange(2, 12)
    dx_da = np.tile([0.0, -1.0, 0.0, 1.0, 0.0], 2)
    dx_db = np.tile([-1.0, 0.0, 0.0, 0.0, 1.0], 2)
    jac = np.empty((2, 2))
    for row, k in enumerate((k_dd, other)):
        d = 4.0 * sign * np.cos(2 * np.pi * k * x)
        jac[row] = [d @ dx_da, d @ dx_db]
    return jac


def attainable_interval(k_dd: int = 1) -> tuple[float, float]:
    """Open interval of reachable ``f_{k_DD}`` for the supported harmonics."""
    if k_dd == 1:
        return -F_BOUND, F_BOUND
    if k_dd == 3:
        return -4.0 / np.pi, 4.0 / np.pi
    raise ValueError(f"k_DD = {k_dd} not supported (use 1 or 3)")


def _closed_form(target: float, k_dd: int) -> tuple[float, float]:
    """Solve for ``(u, v) = (cos 2 pi a, cos 2 pi b)``.

    Both constraints reduce to a fixed difference ``u - v = d`` and a fixed
    ``u^2 + u v + v^2 = q`` via ``T_3(u) - T_3(v) = (u - v)(4(u^2+uv+v^2) - 3)``.
    """
    if k_dd == 1:
        d = (1.0 - np.pi * target / 4.0) / 2.0
        q = (1.0 / (2.0 * d) + 3.0) / 4.0
    else:
        d = 0.5
        q = 1.0 + 3.0 * np.pi * target / 16.0
    disc = 12.0 * q - 3.0 * d * d
    if disc < 0:
        raise UnreachableCoefficientError(f"unreachable coefficient f_{k_dd} = {target}")
    v = (-3.0 * d + np.sqrt(disc)) / 6.0
    return v + d, v


def solve_axy_positions(
    target_f: float,
    k_dd: int = 1,
    parity: Parity = "even",
    tol: float = 1e-12,
    max_iter: int = 50,
) -> CompositePulseLayout:
    """Composite sub-pulse positions realising ``f_{k_DD} = target_f``.

    The other odd harmonic in ``{1, 3}`` is driven to zero; harmonics 2 and 4
    and all coefficients of the opposite parity vanish by symmetry.  The
    closed-form Chebyshev solution seeds a damped Newton refinement on the
    raw Fourier residual.

    Raises
    ------
    UnreachableCoefficientError
        ``target_f`` outside :func:`attainable_interval`.
    SolverError
        Newton refinement fails to bring the residual below ``tol``.
    """
    lo, hi = attainable_interval(k_dd)
    if not lo < target_f < hi:
        raise UnreachableCoefficientError(
            f"unreachable coefficient: f_{k_dd} = {target_f} outside ({lo:.6f}, {hi:.6f})"
        )
    # odd layouts are even ones advanced by tau/4: b_k = -sin(k pi / 2) a_k^even
    even_target = target_f if parity == "even" else -np.sin(k_dd * np.pi / 2) * target_f
    other = 3 if k_dd == 1 else 1

    u, v = _closed_form(even_target, k_dd)
    if not (0.0 < v < u < 1.0):
        raise UnreachableCoefficientError(f"unreachable coefficient f_{k_dd} = {target_f}")
    ab = np.arccos([u, v]) / (2 * np.pi)

    res = _residual(ab, k_dd, other, even_target)
    for _ in range(max_iter):
        if np.max(np.abs(res)) < tol:
            break
        step = np.linalg.solve(_jacobian(ab, k_dd, other), -res)
        lam = 1.0
        while lam > 1e-6:
            trial = ab + lam * step
            if 0 < trial[0] < trial[1] < 0.25:
                new = _residual(trial, k_dd, other, even_target)
                if np.max(np.abs(new)) < np.max(np.abs(res)):
                    ab, res = trial, new
                    break
            lam /= 2
        else:
            break
    if np.max(np.abs(res)) >= max(tol, 1e-10):
        raise SolverError(f"solver failed: residual {np.max(np.abs(res)):.3e}")
    a, b = ab
    return CompositePulseLayout(
        tuple(0.25 + np.array([-b, -a, 0.0, a, b])), parity=parity, k_dd=k_dd, target_f=target_f
    )


# ---------------------------------------------------------------------------
# schedules
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class AxySequenceSpec:
    """Parameters of one AXY pulse train."""

    layout: CompositePulseLayout
    tau: float
    repetitions: int
    rabi: float = 2 * np.pi * 20e6
    variant: Literal["AXY4", "AXY8"] = "AXY8"
    knill_phases: tuple[float, ...] = KNILL_PHASES
    max_width_ratio: float = MAX_WIDTH_RATIO

    def __post_init__(self):
        if self.variant not in ORDER:
            raise ValueError(f"unknown variant {self.variant!r}")
        if self.repetitions < 1 or int(self.repetitions) != self.repetitions:
            raise ValueError("repetitions must be a positive integer")
        if not self.tau > 0 or not self.rabi > 0:
            raise ValueError("tau and rabi must be positive")
        if abs(self.layout.target_f) >= F_BOUND and self.layout.k_dd == 1:
            raise UnreachableCoefficientError("target_f outside the attainable interval")

    @property
    def target_f(self) -> float:
        return self.layout.target_f

    @property
    def k_dd(self) -> int:
        return self.layout.k_dd

    @property
    def parity(self) -> Parity:
        return self.layout.parity

    @property
    def n_composites(self) -> int:
        return len(ORDER[self.variant]) * self.repetitions

    @property
    def duration(self) -> float:
        return self.n_composites * self.tau / 2.0

    @property
    def pulse_width(self) -> float:
        return np.pi / self.rabi


@dataclass(frozen=True)
class Pulse:
    start: float
    duration: float
    phase: float
    amplitude: float

    @property
    def center(self) -> float:
        return self.start + self.duration / 2.0

    @property
    def end(self) -> float:
        return self.start + self.duration


@dataclass(frozen=True)
class PulseSchedule:
    """Time-ordered rectangular microwave pulses.

    For ``instantaneous`` schedules every pulse has zero duration and stands
    for an ideal pi rotation at ``start``.
    """

    pulses: tuple[Pulse, ...]
    total_duration: float
    instantaneous: bool = False
    nominal_width: float = 0.0

    def __post_init__(self):
        object.__setattr__(self, "pulses", tuple(self.pulses))
        for p, q in zip(self.pulses, self.pulses[1:]):
            if q.start < p.end - 1e-18:
                raise OverlapError(f"pulses at {p.start:.6e} s and {q.start:.6e} s overlap")

    @property
    def centers(self) -> NDArray[np.float64]:
        return np.array([p.center for p in self.pulses])

    def concatenate(self, other: PulseSchedule) -> PulseSchedule:
        shift = self.total_duration
        moved = [Pulse(p.start + shift, p.duration, p.phase, p.amplitude) for p in other.pulses]
        return PulseSchedule(
            self.pulses + tuple(moved),
            self.total_duration + other.total_duration,
            self.instantaneous and other.instantaneous,
            max(self.nominal_width, other.nominal_width),
        )


def build_schedule(spec: AxySequenceSpec, instantaneous: bool = False) -> PulseSchedule:
    """Compile ``spec`` into explicit pulses.

    Composite ``c`` (base phase from the X-Y-X-Y-Y-X-Y-X order for AXY8)
    contributes five pi pulses with Knill phase offsets.  Pulses are nominal:
    amplitude ``rabi`` and width ``pi / rabi``; control errors are applied
    at propagation time.

    Raises
    ------
    OverlapError
        If neighbouring finite pulses are closer than 10% of a pulse width.
    ValueError
        If the pulse width is not small compared to ``tau``.
    """
    tau = spec.tau
    total = spec.duration
    order = ORDER[spec.variant]
    width = 0.0 if instantaneous else spec.pulse_width
    x = np.asarray(spec.layout.positions)
    shift = spec.layout.offset * tau

    raw = []  # (center, phase)
    for c in range(spec.n_composites):
        base = BASE_PHASE[order[c % len(order)]]
        for xi, kp in zip(x, spec.knill_phases):
            t = c * tau / 2.0 + xi * tau + shift
            if t < 0:
                t += total
            raw.append((t, base + kp))
    raw.sort(key=lambda r: r[0])

    pulses = []
    for center, phase in raw:
        start = min(max(center - width / 2.0, 0.0), total - width)
        pulses.append(Pulse(start, width, float(np.mod(phase, 2 * np.pi)), spec.rabi))

    if not instantaneous:
        for i, (p, q) in enumerate(zip(pulses, pulses[1:])):
            if q.start - p.end < MIN_GAP_FACTOR * width:
                raise OverlapError(
                    f"overlap: pulses {i} ({p.center:.4e} s) and {i + 1} ({q.center:.4e} s) "
                    f"are closer than {1 + MIN_GAP_FACTOR:.1f} pulse widths ({width:.3e} s)"
                )
        if width / tau >= spec.max_width_ratio:
            raise ValueError(
                f"pulse width {width:.3e} s is not quasi-instantaneous for tau = {tau:.3e} s"
            )
    return PulseSchedule(tuple(pulses), total, instantaneous, spec.pulse_width)


def modulation_function(schedule: PulseSchedule, t: ArrayLike) -> NDArray[np.float64]:
    """Sign function ``F(t)``: ``F(0) = 1``, flipping at every pulse centre."""
    t = np.asarray(t, dtype=float)
    if np.any(t < 0) or np.any(t > schedule.total_duration * (1 + 1e-12)):
        raise ValueError("t outside the schedule")
    centers = np.array([p.start for p in schedule.pulses]) if schedule.instantaneous else schedule.centers
    flips = np.searchsorted(centers, t, side="left")
    # a flip exactly at t = 0 acts only for t > 0
    flips = np.where(t == 0, 0, flips)
    return np.where(flips % 2 == 0, 1.0, -1.0)


def flip_times(schedule: PulseSchedule) -> NDArray[np.float64]:
    return np.array([p.start for p in schedule.pulses]) if schedule.instantaneous else schedule.centers


# ---------------------------------------------------------------------------
# export
# ---------------------------------------------------------------------------

def schedule_report(spec: AxySequenceSpec, k_max: int = 8) -> dict:
    """Spec echo and achieved Fourier coefficients of one period.

    ``residuals`` covers the constrained harmonics: ``k_DD``, the other
    member of ``{1, 3}`` and every even harmonic.  Odd harmonics from 5 up are
    not controlled by the two layout parameters and are listed separately.
    """
    a, b = fourier_coefficients(spec.layout.period_positions(), k_max)
    achieved = b if spec.parity == "odd" else a
    controlled = [k for k in range(0, k_max + 1) if k in (1, 3) or k % 2 == 0]
    residual = {
        str(k): float(achieved[k] - (spec.target_f if k == spec.k_dd else 0.0)) for k in controlled
    }
    free = {str(k): float(achieved[k]) for k in range(5, k_max + 1, 2)}
    return {
        "variant": spec.variant,
        "repetitions": spec.repetitions,
        "tau_s": spec.tau,
        "k_dd": spec.k_dd,
        "parity": spec.parity,
        "target_f": spec.target_f,
        "rabi_rad_per_s": spec.rabi,
        "positions": list(spec.layout.positions),
        "total_duration_s": spec.duration,
        "residuals": residual,
        "uncontrolled_harmonics": free,
        "max_abs_residual": max(abs(r) for r in residual.values()),
        "opposite_parity_max_abs": float(np.max(np.abs(a if spec.parity == "odd" else b))),
    }


def write_schedule(schedule: PulseSchedule, path: str | Path, header: dict | None = None) -> None:
    """Write ``path`` (CSV) and ``path`` with suffix ``.json`` (header)."""
    path = Path(path)
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(["start_s", "duration_s", "phase_rad", "amplitude_rad_per_s"])
        for p in schedule.pulses:
            w.writerow([f"{v:.12g}" for v in (p.start, p.duration, p.phase, p.amplitude)])
    meta = dict(header or {})
    meta.update(total_duration_s=schedule.total_duration, instantaneous=schedule.instantaneous,
                n_pulses=len(schedule.pulses))
    path.with_suffix(".json").write_text(json.dumps(meta, indent=2, sort_keys=True))
