"""(2+1)-qubit phase-error repetition code built from AXY gates.

Qubit 0 is the electron, qubits 1 and 2 the nuclear spins.  The protocol

1. encodes ``|psi>|0>|0>`` with ``U_enc = A^x_2(pi/2) A^x_1(pi/2)``,
2. rotates the electron into its storage frame ``R``,
3. suffers the dephasing channel (or an injected Pauli error),
4. undoes ``R`` and decodes with ``U_enc^+``,
5. reads each nucleus by ``iSWAP_j``, an ideal electron measurement and
   ``iSWAP_j^+``,
6. applies the recovery selected by the two syndrome bits.

The storage frame is not a free choice: :func:`derive_syndrome_table` picks
the first electron rotation for which all single errors land in distinct
syndromes.

All protocol steps act on 8x8 density matrices through 64x64
superoperators, so ideal, unitary and dissipative gates share one code path.
"""

from __future__ import annotations

import itertools
import logging
from dataclasses import dataclass
from typing import Literal, Mapping, Sequence

import numpy as np
from numpy.typing import ArrayLike, NDArray
from scipy.linalg import expm

from .dynamics import ControlErrorModel, NoiseModel, apply_superoperator, unitary_superoperator
from .gates import (
    GateSpec,
    ideal_gate,
    optimize_gate_time,
    sequence_for_gate,
    simulate_gate,
    simulate_gate_channel,
)
from .register import IDENTITY_2, PAULI, SIGMA_X, SIGMA_Y, SpinRegister, embed

log = logging.getLogger(__name__)

N_QUBITS = 3
DIM = 2**N_QUBITS
ERROR_LABELS = ("1", "Z0", "Z1", "Z2")


class DegenerateCodeError(RuntimeError):
    """Distinct recoveries share a syndrome."""


def single_error_probability(p: float) -> float:
    """Probability of exactly one phase error on three qubits, ``3 p (1 - p)^2``."""
    return 3.0 * p * (1.0 - p) ** 2


@dataclass(frozen=True)
class ErrorChannel:
    """Independent dephasing ``(1 - p) rho + p Z rho Z`` on every qubit."""

    p: float

    def __post_init__(self):
        if not 0.0 <= self.p <= 0.5:
            raise ValueError("error probability must lie in [0, 1/2]")

    @classmethod
    def from_rate(cls, gamma: float, t: float) -> ErrorChannel:
        return cls((1.0 - np.exp(-gamma * t)) / 2.0)


def pauli_string(label: str, n: int = N_QUBITS) -> NDArray[np.complex128]:
    """``"Z1"`` -> sigma_z on qubit 1; ``"1"`` -> identity; ``"X0X1X2"`` -> product."""
    if label == "1":
        return np.eye(2**n, dtype=complex)
    ops = {}
    for name, q in zip(label[::2], label[1::2]):
        ops[int(q)] = ops.get(int(q), IDENTITY_2) @ PAULI[name.lower()]
    return embed(ops, n)


def apply_error_channel(rho: NDArray, p: float) -> NDArray[np.complex128]:
    """Apply ``Lambda_j(rho) = (1 - p) rho + p Z_j rho Z_j`` for j = 0, 1, 2."""
    if not 0.0 <= p <= 1.0:
        raise ValueError("error probability must lie in [0, 1]")
    rho = np.asarray(rho, dtype=complex)
    n = int(np.log2(rho.shape[0]))
    if rho.shape != (2**n, 2**n):
        raise ValueError("rho must be a qubit density matrix")
    for j in range(n):
        z = embed({j: PAULI["z"]}, n)
        rho = (1 - p) * rho + p * z @ rho @ z
    return rho


# ---------------------------------------------------------------------------
# electron rotations and composite gates
# ---------------------------------------------------------------------------

def electron_rotation(axis: str, n_nuclei: int = 2) -> NDArray[np.complex128]:
    """``X_{pi/2}`` / ``Y_{pi/2}`` on the electron, ``exp(+i pi/4 sigma)``.

    This sign makes ``Y A^x Y^+ X^+ A^y X`` equal to ``iSWAP`` exactly.
    """
    return embed({0: expm(1j * np.pi / 4 * PAULI[axis])}, n_nuclei + 1)


def iswap_direct(j: int, n_nuclei: int = 2) -> NDArray[np.complex128]:
    """``exp(i pi/4 (XX + YY))`` between the electron and nucleus ``j``."""
    xx = embed({0: SIGMA_X, j + 1: SIGMA_X}, n_nuclei + 1)
    yy = embed({0: SIGMA_Y, j + 1: SIGMA_Y}, n_nuclei + 1)
    return expm(1j * np.pi / 4 * (xx + yy))


class GateSet:
    """Superoperators of the elementary conditional rotations.

    ``ideal`` uses exact exponentials; otherwise each ``A^{x,y}_j(+-pi/2)`` is
    an AXY sequence simulated on ``register`` (unitarily, or with T1 noise).
    """

    def __init__(
        self,
        register: SpinRegister,
        mode: Literal["ideal", "simulated"] = "ideal",
        repetitions: Mapping[int, int] | None = None,
        errors: ControlErrorModel | None = None,
        noise: NoiseModel | None = None,
        rabi: float = 2 * np.pi * 20e6,
        instantaneous: bool = False,
        k_dd: int = 1,
    ):
        if register.n_nuclei != 2:
            raise ValueError(f"the repetition code needs 2 nuclei, got {register.n_nuclei}")
        self.register = register
        self.mode = mode
        self.repetitions = dict(repetitions or {})
        self.errors = errors
        self.noise = noise
        self.rabi = rabi
        self.instantaneous = instantaneous
        self.k_dd = k_dd
        self._cache: dict = {}
        self.durations: dict = {}

    def _gate_spec(self, j: int, axis: str, sign: int) -> GateSpec:
        return GateSpec(j, axis, sign * np.pi / 2)

    def unitary(self, j: int, axis: str, sign: int = 1) -> NDArray[np.complex128]:
        spec = self._gate_spec(j, axis, sign)
        if self.mode == "ideal":
            return ideal_gate(2, spec)
        seq = sequence_for_gate(self.register, spec, self.repetitions[j], self.k_dd, self.rabi)
        self.durations[(j, axis, sign)] = seq.duration
        return simulate_gate(self.register, seq, self.errors, self.instantaneous)

    def channel(self, j: int, axis: str, sign: int = 1) -> NDArray[np.complex128]:
        key = (j, axis, sign)
        if key not in self._cache:
            if self.mode == "simulated" and self.noise is not None:
                spec = self._gate_spec(j, axis, sign)
                seq = sequence_for_gate(self.register, spec, self.repetitions[j], self.k_dd, self.rabi)
                self.durations[key] = seq.duration
                self._cache[key] = simulate_gate_channel(
                    self.register, seq, self.errors, self.noise, self.instantaneous
                )
            else:
                self._cache[key] = unitary_superoperator(self.unitary(j, axis, sign))
        return self._cache[key]

    def total_gate_time(self) -> float:
        return float(sum(self.durations.values()))


def optimized_repetitions(
    register: SpinRegister, target_fidelity: float = 0.999, n_max: int = 200, k_dd: int = 1
) -> dict[int, int]:
    """Speed-optimised repetition number of ``A^x_j(pi/2)`` for every nucleus."""
    return {
        j: optimize_gate_time(register, GateSpec(j, "x", np.pi / 2), target_fidelity, n_max, k_dd).N
        for j in range(register.n_nuclei)
    }


def build_encoding(register: SpinRegister, mode: str | GateSet = "ideal") -> NDArray[np.complex128]:
    """``U_enc = A^x_2(pi/2) A^x_1(pi/2)`` (nuclei indexed 0 and 1 in code)."""
    gs = mode if isinstance(mode, GateSet) else GateSet(register, mode)
    return gs.unitary(1, "x") @ gs.unitary(0, "x")


def compose_iswap(register: SpinRegister, j: int, mode: str | GateSet = "ideal") -> NDArray[np.complex128]:
    """``Y_{pi/2} A^x_j(pi/2) Y_{pi/2}^+ X_{pi/2}^+ A^y_j(pi/2) X_{pi/2}``."""
    gs = mode if isinstance(mode, GateSet) else GateSet(register, mode)
    if j not in (0, 1):
        raise ValueError(f"invalid nuclear index {j}")
    X = electron_rotation("x")
    Y = electron_rotation("y")
    return Y @ gs.unitary(j, "x") @ Y.conj().T @ X.conj().T @ gs.unitary(j, "y") @ X


# ---------------------------------------------------------------------------
# syndrome table
# ---------------------------------------------------------------------------

FRAME_CANDIDATES = ("none", "y", "x")


def frame_rotation(name: str) -> NDArray[np.complex128]:
    return np.eye(DIM, dtype=complex) if name == "none" else electron_rotation(name)


@dataclass(frozen=True)
class SyndromeEntry:
    error: str
    decoded: str
    syndrome: tuple[int, int]
    recovery: str


@dataclass(frozen=True)
class SyndromeTable:
    entries: tuple[SyndromeEntry, ...]
    storage_frame: str

    def recovery_for(self, syndrome: tuple[int, int]) -> str:
        for e in self.entries:
            if e.syndrome == syndrome:
                return e.recovery
        return "1"

    def as_dict(self) -> dict:
        return {
            "storage_frame": self.storage_frame,
            "entries": [
                {"error": e.error, "decoded": e.decoded, "syndrome": list(e.syndrome), "recovery": e.recovery}
                for e in self.entries
            ],
        }


def _pauli_decomposition(op: NDArray, tol: float = 1e-9) -> str:
    """Label of the single Pauli string (up to phase) equal to ``op``."""
    for names in itertools.product("1xyz", repeat=N_QUBITS):
        label = "".join(f"{n.upper()}{q}" for q, n in enumerate(names) if n != "1") or "1"
        p = pauli_string(label)
        overlap = np.trace(p.conj().T @ op) / DIM
        if abs(abs(overlap) - 1) < tol:
            return label
    raise ValueError("operator is not a Pauli string")


REFERENCE_TABLE = {  # error -> (decoded, syndrome, recovery), published reference
    "1": ("1", (0, 0), "1"),
    "Z0": ("X0X1X2", (1, 1), "X0"),
    "Z1": ("Z0Y1", (1, 0), "Z0"),
    "Z2": ("Z0Y2", (1, 1), "Z0"),
}


def derive_syndrome_table(encoding: NDArray, candidates: Sequence[str] = FRAME_CANDIDATES) -> SyndromeTable:
    """Brute-force syndrome table of the encoding.

    For each storage-frame candidate ``R`` the decoded error
    ``U^+ R^+ E R U`` is factored into an electron part (the recovery) and a
    nuclear bit-flip pattern (the syndrome on input ``|psi>|0>|0>``).  The
    first candidate whose four errors have pairwise distinct syndromes or
    identical recoveries wins.

    Raises
    ------
    DegenerateCodeError
        If no candidate separates the errors.
    """
    reports = []
    for name in candidates:
        r = frame_rotation(name)
        entries = []
        for label in ERROR_LABELS:
            dec = encoding.conj().T @ r.conj().T @ pauli_string(label) @ r @ encoding
            decoded = _pauli_decomposition(dec)
            # nuclear X or Y flips |0>, Z only adds a phase
            syndrome = tuple(int(f"X{q}" in decoded or f"Y{q}" in decoded) for q in (1, 2))
            electron = "".join(decoded[i : i + 2] for i in range(0, len(decoded), 2) if decoded[i + 1 : i + 2] == "0")
            entries.append(SyndromeEntry(label, decoded, syndrome, electron or "1"))
        by_syndrome: dict = {}
        ok = True
        for e in entries:
            prev = by_syndrome.setdefault(e.syndrome, e.recovery)
            ok &= prev == e.recovery
        if ok:
            table = SyndromeTable(tuple(entries), name)
            for e in entries:
                expected = REFERENCE_TABLE[e.error]
                if (e.decoded, e.syndrome, e.recovery) != expected:
                    log.info("syndrome table differs from the reference table for %s: %s vs %s", e.error,
                             (e.decoded, e.syndrome, e.recovery), expected)
            return table
        reports.append(name)
    raise DegenerateCodeError(f"degenerate code: no storage frame in {reports} separates the errors")


# ---------------------------------------------------------------------------
# protocol
# ---------------------------------------------------------------------------

@dataclass
class ProtocolConfig:
    """Protocol settings.

    ``gates`` selects ideal or simulated conditional rotations; ``p`` is the
    per-qubit dephasing probability.  ``averaging`` is ``"two_design"``
    (exact six-state average) or ``"haar"`` (Monte Carlo with ``samples`` and
    ``seed``).
    """

    gates: GateSet | None = None
    p: float = 0.0
    averaging: Literal["two_design", "haar"] = "two_design"
    samples: int = 10_000
    seed: int = 0
    flip_errors: bool = False

    def __post_init__(self):
        ErrorChannel(self.p)
        if self.averaging not in ("two_design", "haar"):
            raise ValueError(f"unknown averaging mode {self.averaging!r}")


@dataclass
class ProtocolResult:
    rho_out: NDArray[np.complex128]
    syndrome_probabilities: dict[tuple[int, int], float]
    fidelity: float


class RepetitionCode:
    """Compiled protocol channel for one gate set.

    The map ``|psi><psi| -> rho_out`` is assembled once; evaluating input
    states is then a matrix-vector product.
    """

    def __init__(self, register: SpinRegister, config: ProtocolConfig):
        self.register = register
        self.config = config
        self.gates = config.gates or GateSet(register, "ideal")
        self.table = derive_syndrome_table(build_encoding(register, "ideal"))
        ideal = GateSet(register, "ideal")
        # flip-error variant: Hadamard frame change on every qubit around storage
        self._pre = np.eye(DIM, dtype=complex)
        if config.flip_errors:
            h = (PAULI["x"] + PAULI["z"]) / np.sqrt(2)
            self._pre = embed({0: h, 1: h, 2: h}, N_QUBITS)
        self._r = frame_rotation(self.table.storage_frame)
        self._x = electron_rotation("x")
        self._y = electron_rotation("y")
        self._ideal = ideal

    # -- superoperator building blocks -------------------------------------
    def _u(self, u: NDArray) -> NDArray:
        return unitary_superoperator(u)

    def encode(self) -> NDArray:
        g = self.gates
        return g.channel(1, "x") @ g.channel(0, "x")

    def decode(self) -> NDArray:
        g = self.gates
        return g.channel(0, "x", -1) @ g.channel(1, "x", -1)

    def iswap(self, j: int, dagger: bool = False) -> NDArray:
        g, X, Y = self.gates, self._u(self._x), self._u(self._y)
        Xd, Yd = self._u(self._x.conj().T), self._u(self._y.conj().T)
        if not dagger:
            return Y @ g.channel(j, "x") @ Yd @ Xd @ g.channel(j, "y") @ X
        return Xd @ g.channel(j, "y", -1) @ X @ Y @ g.channel(j, "x", -1) @ Yd

    def error(self, injected: str | None) -> NDArray:
        """Storage step: physical error channel between the local frame changes.

        With ``flip_errors`` the physical channel flips bits (``sigma_x``) and
        every qubit is rotated by a Hadamard before and after storage, which
        maps the flips onto the phase errors the code corrects.  Injected
        labels are given in the physical error basis.
        """
        kind = "X" if self.config.flip_errors else "Z"
        if injected is not None:
            e = self._u(pauli_string(injected))
        else:
            e = np.eye(DIM * DIM, dtype=complex)
            p = self.config.p
            for j in range(N_QUBITS):
                z = self._u(pauli_string(f"{kind}{j}"))
                e = ((1 - p) * np.eye(DIM * DIM) + p * z) @ e
        pre = self._u(self._pre)
        return pre.conj().T @ e @ pre
    def branches(self, injected: str | None = None) -> dict[tuple[int, int], NDArray]:
        """Superoperators of the four syndrome branches, recovery included."""
        front = (
            self.decode() @ self._u(self._r.conj().T) @ self.error(injected) @ self._u(self._r) @ self.encode()
        )
        proj = [self._u(embed({0: np.diag([1.0, 0.0]).astype(complex)}, N_QUBITS)),
                self._u(embed({0: np.diag([0.0, 1.0]).astype(complex)}, N_QUBITS))]
        out = {}
        for s1, s2 in itertools.product((0, 1), repeat=2):
            m1 = self.iswap(0, True) @ proj[s1] @ self.iswap(0)
            m2 = self.iswap(1, True) @ proj[s2] @ self.iswap(1)
            rec = self._u(pauli_string(self.table.recovery_for((s1, s2))))
            out[(s1, s2)] = rec @ m2 @ m1 @ front
        return out

    def run(self, psi: ArrayLike, injected: str | None = None) -> ProtocolResult:
        psi = np.asarray(psi, dtype=complex).reshape(2)
        if abs(np.vdot(psi, psi) - 1) > 1e-9:
            raise ValueError("input state is not normalised")
        rho0 = np.kron(np.outer(psi, psi.conj()), np.diag([1.0, 0, 0, 0]))
        total = np.zeros((DIM, DIM), dtype=complex)
        probs = {}
        for s, sup in self.branches(injected).items():
            rho = apply_superoperator(sup, rho0)
            probs[s] = float(np.trace(rho).real)
            total += rho
        rho_e = np.trace(total.reshape(2, 4, 2, 4), axis1=1, axis2=3)
        fid = float(np.real(psi.conj() @ rho_e @ psi))
        return ProtocolResult(rho_e, probs, fid)


def run_protocol(
    register: SpinRegister, config: ProtocolConfig, psi: ArrayLike, injected: str | None = None
) -> ProtocolResult:
    """Run the code on ``psi`` (optionally with a deterministic Pauli error)."""
    return RepetitionCode(register, config).run(psi, injected)


TWO_DESIGN_STATES = (
    np.array([1, 0], dtype=complex),
    np.array([0, 1], dtype=complex),
    np.array([1, 1], dtype=complex) / np.sqrt(2),
    np.array([1, -1], dtype=complex) / np.sqrt(2),
    np.array([1, 1j], dtype=complex) / np.sqrt(2),
    np.array([1, -1j], dtype=complex) / np.sqrt(2),
)


@dataclass(frozen=True)
class FidelityEstimate:
    value: float
    stderr: float = 0.0
    per_state: tuple[float, ...] = ()


def haar_states(samples: int, seed: int) -> NDArray[np.complex128]:
    rng = np.random.default_rng(seed)
    z = rng.normal(size=(samples, 2)) + 1j * rng.normal(size=(samples, 2))
    return z / np.linalg.norm(z, axis=1, keepdims=True)


def average_correction_fidelity(register: SpinRegister, config: ProtocolConfig) -> FidelityEstimate:
    """Average of ``<psi| Gamma(|psi><psi|) |psi>`` over input states.

    The six Pauli eigenstates form a 2-design, which makes the average exact
    because the integrand is quadratic in ``|psi><psi|``.
    """
    code = RepetitionCode(register, config)
    if config.averaging == "two_design":
        fids = tuple(code.run(psi).fidelity for psi in TWO_DESIGN_STATES)
        return FidelityEstimate(float(np.mean(fids)), 0.0, fids)
    if config.samples < 2:
        raise ValueError("Monte Carlo averaging needs at least 2 samples")
    channel = sum(code.branches().values())
    states = haar_states(config.samples, config.seed)
    fids = np.empty(len(states))
    proj0 = np.diag([1.0, 0, 0, 0])
    for i, psi in enumerate(states):
        rho = apply_superoperator(channel, np.kron(np.outer(psi, psi.conj()), proj0))
        rho_e = np.trace(rho.reshape(2, 4, 2, 4), axis1=1, axis2=3)
        fids[i] = np.real(psi.conj() @ rho_e @ psi)
    return FidelityEstimate(float(fids.mean()), float(fids.std(ddof=1) / np.sqrt(len(fids))))


# ---------------------------------------------------------------------------
# reporting
# ---------------------------------------------------------------------------

@dataclass
class QecReport:
    """Serializable summary of one averaged protocol run."""

    config: dict
    syndrome_table: dict
    syndrome_probabilities: dict[str, float]
    per_state_fidelity: list[float]
    average_fidelity: float
    stderr: float
    noise: dict | None = None
    gate_time: float = 0.0

    def to_json(self) -> dict:
        return {
            "config": self.config,
            "syndrome_table": self.syndrome_table,
            "syndrome_probabilities": self.syndrome_probabilities,
            "per_state_fidelity": self.per_state_fidelity,
            "average_fidelity": self.average_fidelity,
            "stderr": self.stderr,
            "noise": self.noise,
            "gate_time_s": self.gate_time,
        }


def qec_report(register: SpinRegister, config: ProtocolConfig, echo: dict | None = None) -> QecReport:
    """Average fidelity plus syndrome statistics averaged over the 2-design."""
    code = RepetitionCode(register, config)
    est = average_correction_fidelity(register, config)
    probs = {f"{a}{b}": 0.0 for a, b in itertools.product((0, 1), repeat=2)}
    for psi in TWO_DESIGN_STATES:
        for s, v in code.run(psi).syndrome_probabilities.items():
            probs[f"{s[0]}{s[1]}"] += v / len(TWO_DESIGN_STATES)
    gs = code.gates
    noise = None
    if gs.noise is not None:
        noise = {"T1_s": gs.noise.T1, "temperature_K": gs.noise.temperature, "n_thermal": gs.noise.n_thermal}
    return QecReport(
        config=dict(echo or {}),
        syndrome_table=code.table.as_dict(),
        syndrome_probabilities=probs,
        per_state_fidelity=list(est.per_state),
        average_fidelity=est.value,
        stderr=est.stderr,
        noise=noise,
        gate_time=gs.total_gate_time(),
    )


def sweep(
    register: SpinRegister,
    ps: Sequence[float],
    repetition_sets: Sequence[Mapping[int, int]] | None = None,
    **gate_kwargs,
) -> list[dict]:
    """Average fidelity over a grid of error probabilities and gate lengths.

    ``repetition_sets=None`` runs ideal gates only.  Gates are simulated once
    per repetition set and reused for every ``p``.
    """
    rows = []
    sets = [None] if repetition_sets is None else list(repetition_sets)
    for reps in sets:
        gs = GateSet(register, "ideal") if reps is None else GateSet(register, "simulated", reps, **gate_kwargs)
        for p in ps:
            est = average_correction_fidelity(register, ProtocolConfig(gates=gs, p=p))
            rows.append({
                "p": float(p),
                "N1": 0 if reps is None else int(reps[0]),
                "N2": 0 if reps is None else int(reps[1]),
                "average_fidelity": est.value,
                "gate_time_s": gs.total_gate_time(),
            })
    return rows
