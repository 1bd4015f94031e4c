"""Adaptive-XY gate compiler and simulator for NV-center nuclear spin registers.

Modules
-------
register
    Spin register, nuclear frames and Hamiltonians.
pulses
    AXY composite pulse solver and pulse schedules.
dynamics
    Unitary and Lindblad propagation of schedules.
gates
    Conditional rotations, fidelity prediction and gate-time optimisation.
qec
    Phase-error repetition code on one electron and two nuclei.
analysis
    Filter functions, soft control and coupling abundance.
"""

from .gates import GateSpec, optimize_gate_time, predicted_fidelity, simulated_fidelity
from .pulses import AxySequenceSpec, build_schedule, solve_axy_positions
from .register import NuclearSpin, SpinRegister, reference_register

__version__ = "0.1.0"

__all__ = [
    "AxySequenceSpec",
    "GateSpec",
    "NuclearSpin",
    "SpinRegister",
    "build_schedule",
    "optimize_gate_time",
    "reference_register",
    "predicted_fidelity",
    "simulated_fidelity",
    "solve_axy_positions",
]
