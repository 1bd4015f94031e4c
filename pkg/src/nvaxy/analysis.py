"""Filter functions, Gaussian soft control and coupling abundance estimates.

These are diagnostics around the gate compiler: none of them feed back into
sequence construction.
"""

from __future__ import annotations

import csv
from dataclasses import dataclass
from pathlib import Path
from typing import Literal

import numpy as np
from numpy.typing import ArrayLike, NDArray
from scipy.integrate import trapezoid
from scipy.special import erf

from .pulses import F_BOUND, PulseSchedule, flip_times
from .register import PhysicalConstants

DIAMOND_LATTICE_CONSTANT = 3.567e-10  # m
C13_NATURAL_ABUNDANCE = 0.011


# ---------------------------------------------------------------------------
# filter functions
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class FilterResult:
    """Accumulated filter integrals ``chi = phi_x + i phi_y`` at each ``omega``."""

    omega: NDArray[np.float64]
    t: float
    phi_x: NDArray[np.float64]
    phi_y: NDArray[np.float64]

    @property
    def chi(self) -> NDArray[np.complex128]:
        return self.phi_x + 1j * self.phi_y

    @property
    def phi_tot(self) -> NDArray[np.float64]:
        return np.hypot(self.phi_x, self.phi_y)


def _segment_integral(omega: NDArray, a: NDArray, b: NDArray) -> NDArray[np.complex128]:
    """``int_a^b exp(i omega s) ds`` for an (n_omega, 1) column and segment rows."""
    # (e^{iwb} - e^{iwa}) / (iw) = e^{iw(a+b)/2} (b - a) sinc(w (b - a) / 2pi)
    width = b - a
    return np.exp(1j * omega * (a + b) / 2) * width * np.sinc(omega * width / (2 * np.pi))


def filter_function(
    source: PulseSchedule | ArrayLike,
    omega: ArrayLike,
    t: float | None = None,
    t0: float = 0.0,
    initial_sign: float = 1.0,
) -> FilterResult:
    """``chi(t) = int_{t0}^{t} F(s) exp(i omega s) ds`` for a piecewise-constant ``F``.

    Parameters
    ----------
    source : PulseSchedule or array_like
        A schedule (flips at the pulse centres) or the flip times themselves.
    omega : array_like
        Angular frequencies in rad/s.
    t : float, optional
        Upper limit; defaults to the schedule duration (or the last flip).
    t0 : float
        Lower limit.  ``F`` is evaluated with its absolute sign history, so
        segments compose: ``chi(t0 -> t1) + chi(t1 -> t2) = chi(t0 -> t2)``.
    initial_sign : float
        ``F`` before the first flip.
    """
    if isinstance(source, PulseSchedule):
        flips = flip_times(source)
        t = source.total_duration if t is None else t
    else:
        flips = np.sort(np.asarray(source, dtype=float))
        t = (flips[-1] if flips.size else 0.0) if t is None else t
    if t < t0:
        raise ValueError("upper limit below lower limit")
    w = np.atleast_1d(np.asarray(omega, dtype=float))[:, None]
    edges = np.concatenate(([t0], flips[(flips > t0) & (flips < t)], [t]))
    # sign on [edges[i], edges[i+1]] counts every flip at or before the left edge
    n_before = np.searchsorted(flips, edges[:-1], side="right")
    signs = initial_sign * np.where(n_before % 2 == 0, 1.0, -1.0)
    chi = (_segment_integral(w, edges[None, :-1], edges[None, 1:]) * signs).sum(axis=1)
    return FilterResult(np.ravel(w), float(t), chi.real, chi.imag)


def peak_bandwidth(omega: ArrayLike, values: ArrayLike, level: float) -> float:
    """Width in ``omega`` of the contiguous region around the maximum with ``values >= level``.

    Returns 0 when the maximum itself is below ``level``.  Region edges are
    linearly interpolated between grid points.
    """
    w = np.asarray(omega, dtype=float)
    v = np.asarray(values, dtype=float)
    i = int(np.argmax(v))
    if v[i] < level:
        return 0.0
    lo = i
    while lo > 0 and v[lo - 1] >= level:
        lo -= 1
    hi = i
    while hi < len(v) - 1 and v[hi + 1] >= level:
        hi += 1

    def cross(a: int, b: int) -> float:
        return w[a] + (level - v[a]) * (w[b] - w[a]) / (v[b] - v[a])

    left = cross(lo - 1, lo) if lo > 0 else w[0]
    right = cross(hi, hi + 1) if hi < len(v) - 1 else w[-1]
    return float(right - left)


def write_filter_csv(result: FilterResult, path: str | Path) -> None:
    with open(path, "w", newline="") as fh:
        out = csv.writer(fh)
        out.writerow(["omega_rad_s", "phi_x_s", "phi_y_s", "phi_tot_s"])
        for row in zip(result.omega, result.phi_x, result.phi_y, result.phi_tot):
            out.writerow([f"{x:.12g}" for x in row])


# ---------------------------------------------------------------------------
# soft control
# ---------------------------------------------------------------------------

class AmplitudeBoundError(ValueError):
    """Gaussian peak amplitude outside the attainable coefficient range."""


def gaussian_amplitude(theta: float, T: float, sigma: float, c_n: float) -> float:
    """Peak ``f0`` whose centred Gaussian accumulates ``theta`` over ``[0, T]``."""
    return theta / (np.sqrt(2 * np.pi) * sigma * c_n * erf(T / (np.sqrt(8) * sigma)))


def _gaussian_integral(a: NDArray, b: NDArray, T: float, sigma: float) -> NDArray:
    """``int_a^b exp(-(s - T/2)^2 / 2 sigma^2) ds``."""
    s = np.sqrt(2) * sigma
    return np.sqrt(np.pi / 2) * sigma * (erf((b - T / 2) / s) - erf((a - T / 2) / s))


@dataclass(frozen=True)
class SoftControlProfile:
    """Gaussian coefficient envelope ``f(t) = f0 exp(-(t - T/2)^2 / 2 sigma^2)``.

    ``edges`` and ``coefficients`` hold the piecewise-constant sampling
    (bin averages rescaled so that ``sum c_n f_i dt_i = theta``); both are
    ``None`` for the continuous profile.
    """

    theta: float
    T: float
    sigma: float
    c_n: float
    f0: float
    dt: float | None = None
    edges: NDArray[np.float64] | None = None
    coefficients: NDArray[np.float64] | None = None

    def continuous(self, t: ArrayLike) -> NDArray[np.float64]:
        t = np.asarray(t, dtype=float)
        return self.f0 * np.exp(-((t - self.T / 2) ** 2) / (2 * self.sigma**2))

    def __call__(self, t: ArrayLike) -> NDArray[np.float64]:
        if self.edges is None:
            return self.continuous(t)
        t = np.asarray(t, dtype=float)
        idx = np.clip(np.searchsorted(self.edges, t, side="right") - 1, 0, len(self.coefficients) - 1)
        return self.coefficients[idx]

    def rotation_angle(self) -> float:
        if self.edges is None:
            return float(self.c_n * self.f0 * _gaussian_integral(np.array(0.0), np.array(self.T), self.T, self.sigma))
        return float(self.c_n * np.sum(self.coefficients * np.diff(self.edges)))

    def l1_error(self, n_grid: int = 200_001) -> float:
        """``int_0^T |f_sampled - f_continuous| dt`` on a fine grid."""
        t = np.linspace(0.0, self.T, n_grid)
        return float(trapezoid(np.abs(self(t) - self.continuous(t)), t))


def soft_control_profile(
    theta: float,
    T: float,
    sigma: float,
    c_n: float,
    sampling: float | Literal["continuous"] = "continuous",
    enforce_bound: bool = True,
) -> SoftControlProfile:
    """Gaussian soft-control envelope for a rotation ``theta`` in time ``T``.

    Parameters
    ----------
    c_n : float
        Rotation rate per unit coefficient, ``m_s g_n / 4`` for AXY-8.
    sampling : float or "continuous"
        Bin width ``dt``; the last bin is truncated at ``T``.

    Raises
    ------
    AmplitudeBoundError
        If ``|f0|`` reaches the attainable coefficient bound.
    """
    if T <= 0 or sigma <= 0:
        raise ValueError("T and sigma must be positive")
    f0 = gaussian_amplitude(theta, T, sigma, c_n)
    if enforce_bound and abs(f0) >= F_BOUND:
        raise AmplitudeBoundError(f"amplitude bound exceeded: |f0| = {abs(f0):.4f} >= {F_BOUND:.4f}")
    if sampling == "continuous":
        return SoftControlProfile(theta, T, sigma, c_n, f0)
    dt = float(sampling)
    if dt <= 0:
        raise ValueError("sampling interval must be positive")
    n_bins = int(np.ceil(T / dt - 1e-9))
    edges = np.minimum(np.arange(n_bins + 1) * dt, T)
    edges[-1] = T
    widths = np.diff(edges)
    means = f0 * _gaussian_integral(edges[:-1], edges[1:], T, sigma) / widths
    means *= theta / (c_n * np.sum(means * widths))
    return SoftControlProfile(theta, T, sigma, c_n, f0, dt, edges, means)


def _su2_step(gx: NDArray, dz: NDArray, dt: NDArray) -> NDArray:
    """``exp(-i dt (gx I^x + dz I^z))`` batched over the leading axis."""
    w = np.sqrt(gx**2 + dz**2)
    a = w * dt / 2
    c = np.cos(a)
    s = dt / 2 * np.sinc(a / np.pi)  # sin(a) / w
    u = np.empty(gx.shape + (2, 2), dtype=complex)
    u[..., 0, 0] = c - 1j * s * dz
    u[..., 1, 1] = c + 1j * s * dz
    u[..., 0, 1] = u[..., 1, 0] = -1j * s * gx
    return u


def shaped_decoupling_efficiency(
    vartheta: ArrayLike,
    g_ratio: float,
    theta: float,
    envelope: ArrayLike | None = None,
) -> NDArray[np.float64]:
    """Decoupling efficiency of a spectator under a time-dependent coupling.

    Time is rescaled to ``s in [0, 1]`` with ``Delta_j T = 2 vartheta``.  The
    spectator coupling follows ``envelope`` (sampled on equal bins,
    normalised to the target rotation ``theta``), scaled by ``g_ratio``.
    A constant envelope reproduces the closed-form efficiency.
    """
    v = np.atleast_1d(np.asarray(vartheta, dtype=float))
    env = np.ones(1) if envelope is None else np.asarray(envelope, dtype=float)
    ds = 1.0 / len(env)
    gx = g_ratio * theta * env / (env.sum() * ds)
    dz = -2.0 * v  # -Delta in rescaled time
    u = np.broadcast_to(np.eye(2, dtype=complex), v.shape + (2, 2)).copy()
    for g in gx:
        u = _su2_step(np.full_like(v, g), dz, np.full_like(v, ds)) @ u
    # back to the static frame: exp(-i Delta T I^z)
    phase = np.exp(-1j * v)
    tr = phase * u[..., 0, 0] + phase.conj() * u[..., 1, 1]
    return np.abs(tr) / 2


def gaussian_envelope(sigma_over_T: float, n_steps: int = 400) -> NDArray[np.float64]:
    """Midpoint samples of the centred Gaussian on ``n_steps`` equal bins of ``[0, 1]``."""
    s = (np.arange(n_steps) + 0.5) / n_steps
    return np.exp(-((s - 0.5) ** 2) / (2 * sigma_over_T**2))


def oscillation_amplitude(values: ArrayLike) -> float:
    v = np.asarray(values, dtype=float)
    return float(v.max() - v.min())


# ---------------------------------------------------------------------------
# coupling abundance
# ---------------------------------------------------------------------------

def dipolar_prefactor(constants: PhysicalConstants | None = None) -> float:
    """``alpha = (mu_0 / 4 pi) hbar |gamma_e gamma_C|`` in rad/s m^3."""
    k = constants or PhysicalConstants()
    return k.mu_0 / (4 * np.pi) * k.hbar * abs(k.gamma_e * k.gamma_c13)


def coupling_abundance(
    A_threshold: ArrayLike,
    p13c: float = C13_NATURAL_ABUNDANCE,
    lattice_constant: float = DIAMOND_LATTICE_CONSTANT,
    constants: PhysicalConstants | None = None,
) -> NDArray | float:
    """Expected number of 13C spins with coupling ``>= A_threshold`` (rad/s).

    ``N = (4/3) pi rho p alpha / A`` for a uniform spin density
    ``rho = 8 / a^3`` and a dipolar ``1/r^3`` coupling without angular factor.
    """
    A = np.asarray(A_threshold, dtype=float)
    if np.any(A <= 0):
        raise ValueError("coupling threshold must be positive")
    rho = 8.0 / lattice_constant**3
    out = 4.0 / 3.0 * np.pi * rho * p13c * dipolar_prefactor(constants) / A
    return float(out) if out.ndim == 0 else out


def joint_abundance_probability(counts: ArrayLike) -> float:
    """Crude probability that every threshold has at least one spin.

    Each count is treated as an independent Poisson mean.
    """
    n = np.asarray(counts, dtype=float)
    return float(np.prod(-np.expm1(-n)))


def write_abundance_csv(thresholds: ArrayLike, counts: ArrayLike, path: str | Path) -> None:
    """Thresholds are written in Hz (``A / 2 pi``)."""
    with open(path, "w", newline="") as fh:
        out = csv.writer(fh)
        out.writerow(["A_threshold_Hz", "expected_count"])
        for a, n in zip(np.atleast_1d(thresholds), np.atleast_1d(counts)):
            out.writerow([f"{a / (2 * np.pi):.12g}", f"{n:.12g}"])
