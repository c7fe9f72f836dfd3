"""
Preparing and certifying three-spin coherence
=============================================

A polarize-entangle-store-disentangle sequence turns the NV and the two
defect electrons into a GHZ-type state. Stepping the disentangler pulse
phases by (90, 36, 18) degrees per repetition tags every stored
coherence sector with its own oscillation rate in the NV readout; the
three-spin coherence appears at 8 pi/10 per step, and its amplitude
bounds the state fidelity.
"""

import math
from pathlib import Path

import numpy as np

from spinforge import (
    DipolarGeometry,
    ErrorModel,
    FieldVector,
    HyperfineTensor,
    NvSpec,
    SpinSystemSpec,
    XDefectSpec,
    coherence_and_fidelity,
    fit_sinusoids,
    run_phase_cycle,
)
from spinforge.plots import plot_phase_cycle

OUT = Path(__file__).parent / "output"
OUT.mkdir(exist_ok=True)

system = SpinSystemSpec(
    nv=NvSpec(),
    defects=(
        XDefectSpec(
            label="X1",
            hyperfine=HyperfineTensor.from_axial(17.2, 29.4, 0.0, 87.0),
            geometry=DipolarGeometry(9.23, 35.0, 20.0),
        ),
        XDefectSpec(
            label="X2",
            hyperfine=HyperfineTensor.from_axial(1.6, 11.2, 45.0, 66.0),
            geometry=DipolarGeometry(6.58, 70.0, 150.0),
        ),
    ),
)
field = FieldVector(171.8, system.nv.axis_theta + 12.0, system.nv.axis_phi)

# ideal pulses: all signal concentrates at the three-spin rate
ideal = run_phase_cycle(system, field)
print("ideal cycle amplitudes by rate i*pi/10:")
print("  " + "  ".join(f"{a:.3f}" for a in ideal.components.amplitudes))
report = coherence_and_fidelity(ideal.components)
print(
    f"coherence {report.coherence:.3f}, fidelity bound "
    f"{report.fidelity_bound:.3f} -> {report.verdict}"
)

# pulse errors redistribute amplitude among the nine protocol rates
# but never create other frequencies
errors = ErrorModel(depolarizing=0.03, over_rotation=0.02, polarization=0.9)
noisy = run_phase_cycle(system, field, error_model=errors)
print("with pulse errors:")
print("  " + "  ".join(f"{a:.3f}" for a in noisy.components.amplitudes))
print(f"  residual rms {noisy.components.residual_rms:.2e}")

# a measured-style record: amplitude 0.43 at the three-spin rate under
# the mean-square 1/2 calibration
rng = np.random.default_rng(7)
n = np.arange(80.0)
signal = (
    0.43 * np.cos(0.8 * np.pi * n + 0.3)
    + math.sqrt(1.0 - 0.43**2) * np.cos(0.5 * np.pi * n - 1.1)
    + rng.normal(0.0, 0.02, n.size)
)
comp = fit_sinusoids(signal, normalize=True)
report = coherence_and_fidelity(comp)
print(
    f"calibrated record: a_8 = {comp.amplitudes[8]:.3f}, fidelity bound "
    f"{report.fidelity_bound:.3f} -> {report.verdict}"
)

plot_phase_cycle(
    noisy.signal, noisy.components.amplitudes, OUT / "phase_cycle.svg"
)
print(f"wrote {OUT / 'phase_cycle.svg'}")
