"""Phase-error repetition code on the electron and two nuclear spins.

Derives the syndrome table by brute force, then compares the average
correction fidelity for ideal gates, simulated AXY gates and simulated gates
with electron T1 relaxation.

Run with ``python demos/repetition_code.py``.
"""

from __future__ import annotations

import numpy as np

from nvaxy.dynamics import ControlErrorModel, calibrate_noise
from nvaxy.qec import (
    GateSet,
    ProtocolConfig,
    average_correction_fidelity,
    build_encoding,
    derive_syndrome_table,
    optimized_repetitions,
)
from nvaxy.register import reference_register

register = reference_register()
table = derive_syndrome_table(build_encoding(register))
print(f"storage frame: {table.storage_frame}")
print(f"{'error':>6} {'decoded':>10} {'syndrome':>9} {'recovery':>9}")
for e in table.entries:
    print(f"{e.error:>6} {e.decoded:>10} {str(e.syndrome):>9} {e.recovery:>9}")

errors = ControlErrorModel(2 * np.pi * 350, 0.0025)
reps = optimized_repetitions(register, 0.999)
noise = calibrate_noise(1.0, 77.0, register.transition_frequency, register.constants)
gate_sets = {
    "ideal": GateSet(register, "ideal"),
    "simulated": GateSet(register, "simulated", reps, errors=errors),
    "simulated + T1": GateSet(register, "simulated", reps, errors=errors, noise=noise),
}

print(f"\nrepetitions per nucleus: {reps}")
ps = [0.0, 0.01, 0.02, 0.05, 0.1, 0.2]
print(f"{'p':>6} {'no code':>9}" + "".join(f"{name:>16}" for name in gate_sets))
for p in ps:
    # an unprotected qubit keeps the state with probability 1 - 2p/3 on average
    row = f"{p:6.2f} {1 - 2 * p / 3:9.5f}"
    for gs in gate_sets.values():
        row += f"{average_correction_fidelity(register, ProtocolConfig(gates=gs, p=p)).value:16.5f}"
    print(row)
print(f"\ntotal AXY gate time per cycle: {gate_sets['simulated'].total_gate_time() * 1e3:.2f} ms")
