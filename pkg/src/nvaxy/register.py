"""Spin register description and per-nucleus rotating frames.

The electron spin of the NV center is truncated to the two-level subspace
spanned by ``|m_s>`` and ``|0>``.  Throughout the package the electron basis
is ordered ``(|m_s>, |0>)`` so that ``sigma_z = |m_s><m_s| - |0><0|`` is the
usual ``diag(1, -1)`` and ``S_z -> (m_s / 2) (sigma_z + 1)``.

Every nuclear spin is represented in its own *frame basis*: the eigenbasis of
``I_j^z = omega_hat_j . I_j`` with transverse axes ``x_hat_j``, ``y_hat_j``
built from the hyperfine vector.  In that basis ``I_j^x``, ``I_j^y`` and
``I_j^z`` are simply half the Pauli matrices, which keeps gate definitions
such as ``exp(-i theta sigma_z I_n^x)`` trivial to write down.

Units: all frequencies are angular (rad/s), fields in Tesla, times in s.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from functools import reduce
from typing import Literal, Mapping, Sequence

import numpy as np
from numpy.typing import NDArray
from scipy import constants as sc

TWO_PI = 2.0 * np.pi
GAUSS = 1e-4  # Tesla
DEFAULT_MAX_NUCLEI = 6

SIGMA_X = np.array([[0, 1], [1, 0]], dtype=complex)
SIGMA_Y = np.array([[0, -1j], [1j, 0]], dtype=complex)
SIGMA_Z = np.array([[1, 0], [0, -1]], dtype=complex)
IDENTITY_2 = np.eye(2, dtype=complex)
PAULI = {"x": SIGMA_X, "y": SIGMA_Y, "z": SIGMA_Z}


class UnaddressableSpinError(ValueError):
    """A nucleus has no hyperfine component orthogonal to its quantisation axis."""


class RegisterError(ValueError):
    """Invalid register parameters."""


@dataclass(frozen=True)
class PhysicalConstants:
    """Physical constants used by the register model (SI, angular units)."""

    gamma_e: float = -TWO_PI * 28.024e9
    gamma_c13: float = TWO_PI * 10.7084e6
    zero_field_splitting: float = TWO_PI * 2.87e9
    hbar: float = sc.hbar
    k_B: float = sc.k
    mu_0: float = sc.mu_0
    dD_dT: float = -TWO_PI * 74.2e3

    def __post_init__(self):
        if not self.gamma_e < 0:
            raise RegisterError("gamma_e must be negative")
        if not self.gamma_c13 > 0:
            raise RegisterError("gamma_c13 must be positive")
        if not self.zero_field_splitting > 0:
            raise RegisterError("zero-field splitting must be positive")

    def detuning_from_temperature(self, delta_T: float) -> float:
        """Microwave detuning (rad/s) caused by a temperature offset ``delta_T`` (K)."""
        return self.dD_dT * delta_T


@dataclass(frozen=True)
class NuclearSpin:
    """A nuclear spin-1/2 coupled to the NV electron.

    Parameters
    ----------
    hyperfine : array_like, shape (3,)
        Hyperfine vector ``A_j`` in rad/s (lab frame, ``z`` along the NV axis).
    gyromagnetic_ratio : float
        rad/s per Tesla.
    label : str
    """

    hyperfine: NDArray[np.float64]
    gyromagnetic_ratio: float = PhysicalConstants.gamma_c13
    label: str = ""

    def __post_init__(self):
        a = np.asarray(self.hyperfine, dtype=float).reshape(3).copy()
        if not np.all(np.isfinite(a)):
            raise RegisterError(f"non-finite hyperfine vector for {self.label!r}")
        a.setflags(write=False)
        object.__setattr__(self, "hyperfine", a)

    @classmethod
    def from_components(cls, a_perp: float, a_par: float, **kwargs) -> NuclearSpin:
        """Build from perpendicular/parallel components, placing ``A_perp`` along x."""
        return cls(np.array([a_perp, 0.0, a_par]), **kwargs)


@dataclass(frozen=True)
class SpinRegister:
    """NV electron plus a list of nuclear spins in a field ``B z_hat``.

    ``internuclear_couplings`` maps index pairs ``(j, k)`` to the secular
    coupling constant ``b_jk`` (rad/s) of ``b_jk (3 I_j^z I_k^z - I_j . I_k)``,
    where ``z`` is the lab (NV) axis.
    """

    nuclei: tuple[NuclearSpin, ...]
    B_field: float
    m_s: int = -1
    constants: PhysicalConstants = field(default_factory=PhysicalConstants)
    internuclear_couplings: Mapping[tuple[int, int], float] = field(default_factory=dict)
    max_nuclei: int = DEFAULT_MAX_NUCLEI

    def __post_init__(self):
        object.__setattr__(self, "nuclei", tuple(self.nuclei))
        if not self.B_field > 0:
            raise RegisterError("B_field must be positive")
        if self.m_s not in (1, -1):
            raise RegisterError("m_s must be +1 or -1")
        if len(self.nuclei) > self.max_nuclei:
            raise RegisterError(
                f"{len(self.nuclei)} nuclei exceed the configured maximum of {self.max_nuclei}"
            )
        couplings = {}
        for (j, k), b in dict(self.internuclear_couplings).items():
            j, k = int(j), int(k)
            if j == k or not (0 <= j < len(self.nuclei) and 0 <= k < len(self.nuclei)):
                raise RegisterError(f"invalid internuclear pair {(j, k)}")
            key = (min(j, k), max(j, k))
            if key in couplings and couplings[key] != b:
                raise RegisterError(f"asymmetric internuclear coupling for {key}")
            couplings[key] = float(b)
        object.__setattr__(self, "internuclear_couplings", couplings)

    @property
    def n_nuclei(self) -> int:
        return len(self.nuclei)

    @property
    def dim(self) -> int:
        return 2 ** (1 + self.n_nuclei)

    @property
    def transition_frequency(self) -> float:
        """Electron transition frequency ``|0> <-> |m_s>`` in rad/s."""
        c = self.constants
        return c.zero_field_splitting * self.m_s**2 - c.gamma_e * self.B_field * self.m_s


@dataclass(frozen=True)
class NuclearFrame:
    """Derived quantities of one nucleus (see :func:`derive_frames`)."""

    omega_vec: NDArray[np.float64]
    omega: float
    x_hat: NDArray[np.float64]
    y_hat: NDArray[np.float64]
    z_hat: NDArray[np.float64]
    g: float
    c: float

    @property
    def axes(self) -> NDArray[np.float64]:
        """Rows are ``x_hat``, ``y_hat``, ``z_hat``."""
        return np.vstack([self.x_hat, self.y_hat, self.z_hat])


def reference_register(
    B_gauss: float = 600.0,
    m_s: int = -1,
    internuclear: Mapping[tuple[int, int], float] | None = None,
) -> SpinRegister:
    """Two 13C spins with the hyperfine couplings used for the gate studies."""
    khz = TWO_PI * 1e3
    nuclei = (
        NuclearSpin.from_components(45.8 * khz, 93.5 * khz, label="C1"),
        NuclearSpin.from_components(35.3 * khz, 49.5 * khz, label="C2"),
    )
    return SpinRegister(
        nuclei=nuclei,
        B_field=B_gauss * GAUSS,
        m_s=m_s,
        internuclear_couplings=dict(internuclear or {}),
    )


def derive_frames(register: SpinRegister, rtol: float = 1e-9) -> list[NuclearFrame]:
    """Effective Larmor vectors and rotated bases of all nuclei.

    ``omega_vec = gamma_j B z_hat - m_s A_j / 2``; ``x_hat`` is the direction of
    the hyperfine component orthogonal to ``omega_vec`` and
    ``y_hat = omega_hat x x_hat``.

    Raises
    ------
    UnaddressableSpinError
        If the orthogonal coupling ``g_j`` is below ``rtol * |omega_vec|``.
    """
    frames = []
    z = np.array([0.0, 0.0, 1.0])
    for j, nuc in enumerate(register.nuclei):
        a = nuc.hyperfine
        w_vec = nuc.gyromagnetic_ratio * register.B_field * z - register.m_s * a / 2.0
        w = float(np.linalg.norm(w_vec))
        if w == 0.0:
            raise UnaddressableSpinError(f"nucleus {j} ({nuc.label}): zero Larmor vector")
        w_hat = w_vec / w
        c = float(a @ w_hat)
        x_vec = a - c * w_hat
        g = float(np.linalg.norm(x_vec))
        if g <= rtol * w:
            raise UnaddressableSpinError(
                f"unaddressable spin: nucleus {j} ({nuc.label}) has orthogonal coupling {g:.3g} rad/s"
            )
        x_hat = x_vec / g
        y_hat = np.cross(w_hat, a) / g
        frames.append(NuclearFrame(w_vec, w, x_hat, y_hat, w_hat, g, c))
    return frames


# ---------------------------------------------------------------------------
# operator construction
# ---------------------------------------------------------------------------

def embed(ops: Mapping[int, NDArray], n_sites: int) -> NDArray[np.complex128]:
    """Tensor product placing 2x2 ``ops[site]`` on the given sites (site 0 = electron)."""
    return reduce(np.kron, [ops.get(s, IDENTITY_2) for s in range(n_sites)])


def electron_operator(op: NDArray, n_nuclei: int) -> NDArray[np.complex128]:
    return embed({0: op}, n_nuclei + 1)


def nuclear_spin_operators(n_nuclei: int, j: int) -> tuple[NDArray, NDArray, NDArray]:
    """``(I^x, I^y, I^z)`` of nucleus ``j`` in its frame basis, full register space."""
    return tuple(embed({j + 1: PAULI[a] / 2}, n_nuclei + 1) for a in "xyz")


def nuclear_vector_operator(
    frames: Sequence[NuclearFrame], j: int, vec: NDArray
) -> NDArray[np.complex128]:
    """``vec . I_j`` for a lab-frame vector, expressed in the frame basis."""
    comps = frames[j].axes @ np.asarray(vec, dtype=float)
    ops = nuclear_spin_operators(len(frames), j)
    return sum(c * op for c, op in zip(comps, ops))


def _internuclear_term(register: SpinRegister, frames: Sequence[NuclearFrame]) -> NDArray:
    h = np.zeros((register.dim, register.dim), dtype=complex)
    lab = np.eye(3)
    for (j, k), b in register.internuclear_couplings.items():
        ij = [nuclear_vector_operator(frames, j, e) for e in lab]
        ik = [nuclear_vector_operator(frames, k, e) for e in lab]
        h += b * (3 * ij[2] @ ik[2] - sum(p @ q for p, q in zip(ij, ik)))
    return h


def system_hamiltonian(register: SpinRegister) -> NDArray[np.complex128]:
    """Register Hamiltonian in the microwave rotating frame (no drive, no detuning).

    ``sum_j [-gamma_j B I_j^z(lab) + S_z A_j . I_j] + H_nn`` with
    ``S_z = (m_s / 2)(1 + sigma_z)``.  The electron energy is removed by the
    rotating frame.
    """
    frames = derive_frames(register)
    n = register.n_nuclei
    dim = register.dim
    h = np.zeros((dim, dim), dtype=complex)
    s_z = register.m_s / 2.0 * (np.eye(dim) + electron_operator(SIGMA_Z, n))
    z = np.array([0.0, 0.0, 1.0])
    for j, nuc in enumerate(register.nuclei):
        h -= nuc.gyromagnetic_ratio * register.B_field * nuclear_vector_operator(frames, j, z)
        h += s_z @ nuclear_vector_operator(frames, j, nuc.hyperfine)
    return h + _internuclear_term(register, frames)


def free_nuclear_hamiltonian(register: SpinRegister) -> NDArray[np.complex128]:
    """Electron-averaged nuclear precession ``-sum_j omega_j I_j^z`` (frame basis)."""
    frames = derive_frames(register)
    n = register.n_nuclei
    h = np.zeros((register.dim, register.dim), dtype=complex)
    for j, fr in enumerate(frames):
        h -= fr.omega * nuclear_spin_operators(n, j)[2]
    return h


@dataclass(frozen=True)
class InteractionHamiltonian:
    """Coefficients of the doubly rotated Hamiltonian

    ``H''(t) = (m_s/2) F(t) sigma_z sum_j [g_j m_j(t) . I_j + c_j I_j^z]``,
    ``m_j(t) = cos(omega_j t) x_hat_j + sin(omega_j t) y_hat_j``.
    """

    m_s: int
    g: NDArray[np.float64]
    c: NDArray[np.float64]
    omega: NDArray[np.float64]

    def __call__(self, t: float, F: float = 1.0) -> NDArray[np.complex128]:
        n = len(self.g)
        sz = electron_operator(SIGMA_Z, n)
        h = np.zeros((2 ** (n + 1),) * 2, dtype=complex)
        for j in range(n):
            ix, iy, iz = nuclear_spin_operators(n, j)
            wt = self.omega[j] * t
            h += self.g[j] * (np.cos(wt) * ix + np.sin(wt) * iy) + self.c[j] * iz
        return self.m_s / 2.0 * F * sz @ h


def build_hamiltonian(
    register: SpinRegister,
    frame: Literal["lab_secular", "nuclear_interaction"] = "lab_secular",
) -> NDArray[np.complex128] | InteractionHamiltonian:
    """Register Hamiltonian in the lab secular frame, or the interaction-picture data.

    ``lab_secular`` returns the Hermitian matrix
    ``(omega_NV / 2) sigma_z + sum_j [-gamma_j B I_j^z + S_z A_j . I_j] + H_nn``
    (constant energy offsets dropped).  ``nuclear_interaction`` returns an
    :class:`InteractionHamiltonian` evaluating the time-dependent coupling.
    """
    if frame == "lab_secular":
        n = register.n_nuclei
        h_e = register.transition_frequency / 2.0 * electron_operator(SIGMA_Z, n)
        return h_e + system_hamiltonian(register)
    if frame == "nuclear_interaction":
        frames = derive_frames(register)
        return InteractionHamiltonian(
            m_s=register.m_s,
            g=np.array([f.g for f in frames]),
            c=np.array([f.c for f in frames]),
            omega=np.array([f.omega for f in frames]),
        )
    raise ValueError(f"unknown frame {frame!r}")
