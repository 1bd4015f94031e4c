"""Conditional rotation A^x_1(pi/2) on a two-nucleus register.

Scans the AXY-8 repetition number, compares the full simulation (finite
pulses, microwave detuning and Rabi error) with the decoupling-efficiency
prediction, and picks the fastest sequence for two fidelity targets.

Run with ``python demos/gate_scan.py``.
"""

from __future__ import annotations

import numpy as np

from nvaxy.dynamics import ControlErrorModel
from nvaxy.gates import (
    GateSpec,
    coupling_limit_ratio,
    high_field_margin,
    optimize_gate_time,
    scan_repetitions,
)
from nvaxy.register import derive_frames, reference_register

errors = ControlErrorModel(detuning=2 * np.pi * 350, rabi_error=0.0025)
gate = GateSpec(target=0, axis="x", angle=np.pi / 2)

for field in (600.0, 850.0):
    register = reference_register(B_gauss=field)
    frames = derive_frames(register)
    print(f"\nB = {field:.0f} G, high-field margin min |gamma B| / |g| = {high_field_margin(register):.2f}")
    print("  nuclear frequencies (kHz):", ", ".join(f"{f.omega / 2e3 / np.pi:.2f}" for f in frames))
    points = scan_repetitions(register, gate, range(4, 41), errors)
    print(f"  {'N':>3} {'f_1':>8} {'1-F sim':>10} {'1-F pred':>10} {'|dw|/|fg|':>10}")
    for p in points:
        ratio = coupling_limit_ratio(register, gate, p.N)
        print(f"  {p.N:3d} {p.f_kdd:8.4f} {p.infidelity:10.2e} {1 - p.predicted_fidelity:10.2e} {ratio:10.2f}")
    best = min(points, key=lambda p: p.infidelity)
    print(f"  best simulated infidelity {best.infidelity:.2e} at N = {best.N}")

register = reference_register()
print("\nFastest sequence from the analytic prediction (600 G):")
for target in (0.99, 0.999):
    res = optimize_gate_time(register, gate, target)
    print(f"  F >= {target}: N = {res.N}, T = {res.total_time * 1e6:.1f} us, T/T_min = {res.time_ratio:.2f}")
