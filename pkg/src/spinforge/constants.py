"""Physical constants and package-wide unit conventions.

Conventions used everywhere in this package:

- energies and frequencies are linear-frequency MHz (factors of 2*pi are
  absorbed into every coupling constant),
- magnetic fields are Gauss,
- distances are nm,
- angles are degrees at public boundaries, radians inside formulas,
- dipolar couplings cross public boundaries in kHz (their natural scale).

Gyromagnetic ratios are stored as positive magnitudes; none of the fitted
observables here depend on their signs.
"""

from __future__ import annotations

import math

# Free-electron gyromagnetic ratio, MHz per Gauss.
GAMMA_E_MHZ_PER_G = 2.802495

# NV ground-state zero-field splitting, MHz.
ZFS_NV_MHZ = 2870.0

# NV molecular-axis orientation in the crystal frame, degrees.
NV_AXIS_THETA_DEG = 54.7
NV_AXIS_PHI_DEG = 0.0

# 15N nuclear gyromagnetic ratio magnitude, MHz per Gauss.
GAMMA_N15_MHZ_PER_G = 4.3156e-4

# Host 15N hyperfine tensor, axial about the NV axis, MHz (literature values).
N15_HYPERFINE_PERP_MHZ = 3.65
N15_HYPERFINE_PAR_MHZ = 3.03

# Dipolar coupling of two electron spins 1 nm apart, kHz (times nm^3).
DIPOLAR_CONSTANT_KHZ_NM3 = 52.041

# Angle where 3 cos^2 - 1 vanishes, degrees.
MAGIC_ANGLE_DEG = math.degrees(math.acos(1.0 / math.sqrt(3.0)))
