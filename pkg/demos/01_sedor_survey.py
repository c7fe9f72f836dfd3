"""
Surveying coupled defects with spin-echo double resonance
=========================================================

An NV spin echo loses amplitude when a recoupling pulse hits the
transition of a coupled electron spin. Sweeping that pulse across the
bare electron Zeeman frequency reveals each hidden defect as a
hyperfine-split doublet centered on the Zeeman line.
"""

from pathlib import Path

import numpy as np

from spinforge import (
    DipolarGeometry,
    FieldVector,
    HyperfineTensor,
    NvSpec,
    SpinSystemSpec,
    XDefectSpec,
    fit_lorentzians,
    sedor_spectrum,
)
from spinforge.constants import GAMMA_E_MHZ_PER_G
from spinforge.hyperfine import secular_strength_numeric
from spinforge.plots import plot_spectrum

OUT = Path(__file__).parent / "output"
OUT.mkdir(exist_ok=True)

# two unidentified electron-nuclear defects near the NV
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

# sweep the recoupling pulse around the bare electron Zeeman frequency
center = abs(GAMMA_E_MHZ_PER_G) * field.b0
grid = np.linspace(center - 18.0, center + 18.0, 6001)
spectrum = sedor_spectrum(system, field, grid, linewidth=200.0)

lines, fit = fit_lorentzians(spectrum, 4)
print(f"bare electron Zeeman frequency: {center:.2f} MHz")
for ln in lines:
    print(f"  dip at {ln.center:8.2f} MHz  depth {ln.amplitude:.3f}")

# doublet splittings measure each defect's secular hyperfine strength
inner = lines[2].center - lines[1].center
outer = lines[3].center - lines[0].center
for label, measured in (("X2", inner), ("X1", outer)):
    model = secular_strength_numeric(system.defect(label).hyperfine, field)
    print(
        f"{label}: doublet splitting {measured:6.2f} MHz, "
        f"tensor model predicts {model:6.2f} MHz"
    )

plot_spectrum(spectrum, OUT / "sedor_survey.svg", title="SEDOR survey")
print(f"wrote {OUT / 'sedor_survey.svg'}")
