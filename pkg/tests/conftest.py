"""Shared fixtures: the default NV, the two-defect reference system."""

import numpy as np
import pytest

from spinforge import (
    DipolarGeometry,
    FieldVector,
    HyperfineTensor,
    NvSpec,
    SpinSystemSpec,
    XDefectSpec,
)

# reference defects used across the suite: axial tensors in MHz/degrees,
# geometry in nm/degrees
X1_TENSOR = (17.2, 29.4, 0.0, 87.0)
X2_TENSOR = (1.6, 11.2, 45.0, 66.0)
X1_GEOMETRY = (9.23, 35.0, 20.0)
X2_GEOMETRY = (6.58, 70.0, 150.0)


def make_system() -> SpinSystemSpec:
    return SpinSystemSpec(
        nv=NvSpec(),
        defects=(
            XDefectSpec(
                label="X1",
                hyperfine=HyperfineTensor.from_axial(*X1_TENSOR),
                geometry=DipolarGeometry(*X1_GEOMETRY),
            ),
            XDefectSpec(
                label="X2",
                hyperfine=HyperfineTensor.from_axial(*X2_TENSOR),
                geometry=DipolarGeometry(*X2_GEOMETRY),
            ),
        ),
    )


@pytest.fixture
def nv() -> NvSpec:
    return NvSpec()


@pytest.fixture
def system() -> SpinSystemSpec:
    return make_system()


@pytest.fixture
def tilted_field(nv) -> FieldVector:
    # 171.8 G tilted 12 degrees off the NV axis, in the axis plane
    return FieldVector(171.8, nv.axis_theta + 12.0, nv.axis_phi)


def random_unit_vector(rng: np.random.Generator) -> np.ndarray:
    v = rng.normal(size=3)
    return v / np.linalg.norm(v)
