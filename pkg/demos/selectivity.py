"""Spectral selectivity: filter functions and Gaussian soft control.

Compares the filter function of two AXY-8 trains whose resonant coefficients
differ by a factor two, then shows how a Gaussian coupling envelope smooths
the decoupling efficiency of the spectator nucleus.

Run with ``python demos/selectivity.py``.
"""

from __future__ import annotations

import numpy as np

from nvaxy.analysis import (
    filter_function,
    gaussian_amplitude,
    gaussian_envelope,
    peak_bandwidth,
    shaped_decoupling_efficiency,
)
from nvaxy.gates import decoupling_efficiency, repetition_length, resonant_tau
from nvaxy.pulses import F_BOUND, AxySequenceSpec, build_schedule, solve_axy_positions
from nvaxy.register import derive_frames, reference_register

register = reference_register()
frames = derive_frames(register)
tau = resonant_tau(register, 0)
omega_dd = 2 * np.pi / tau
omega = np.linspace(0.9, 1.1, 4001) * omega_dd

print("Filter function around omega_DD (10 repetitions):")
results = {}
for f in (0.5, 0.25):
    sched = build_schedule(AxySequenceSpec(solve_axy_positions(f), tau, 10))
    results[f] = filter_function(sched, omega)
level = results[0.5].phi_tot.max() / 4
for f, res in results.items():
    peak = res.phi_tot.max()
    print(f"  f = {f}: peak {peak * 1e6:.3f} us, FWHM {peak_bandwidth(omega, res.phi_tot, peak / 2):.0f} rad/s, "
          f"width above a common level {peak_bandwidth(omega, res.phi_tot, level):.0f} rad/s")

print("\nSpectator decoupling efficiency, constant vs Gaussian (sigma/T = 0.15):")
g_ratio = frames[1].g / frames[0].g
c_n = register.m_s * frames[0].g / 4
envelope = gaussian_envelope(0.15)
print(f"  {'N':>3} {'D const':>10} {'D gauss':>10} {'f0':>8}")
for N in range(8, 41, 4):
    T = repetition_length() * tau * N
    v = (frames[1].omega - frames[0].omega) * T / 2
    d_c = decoupling_efficiency(v, g_ratio, np.pi / 2)
    d_s = shaped_decoupling_efficiency(v, g_ratio, np.pi / 2, envelope)[0]
    f0 = gaussian_amplitude(np.pi / 2, T, 0.15 * T, c_n)
    flag = "" if abs(f0) < F_BOUND else "  (exceeds coefficient bound)"
    print(f"  {N:3d} {d_c:10.6f} {d_s:10.6f} {f0:8.3f}{flag}")
