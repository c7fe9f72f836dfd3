"""Domain types and static spin Hamiltonians shared by every workflow.

Basis orderings are fixed and documented here once:

- NV electron (spin 1): m_s = +1, 0, -1.
- Any spin 1/2: up (+1/2), down (-1/2).
- Composite spaces are Kronecker products in the order stated by each
  constructor, e.g. ``x_defect_hamiltonian`` is (electron (x) nucleus).

The Euler convention is ZYZ with the specific matrix written out in
:func:`rotation_matrix`; a tensor with principal values diag[ax, ay, az] has
crystal-frame components R^T . diag . R, and the principal z axis points
along (sin(beta) cos(alpha), sin(beta) sin(alpha), cos(beta)) in the crystal
frame.

All operations are pure and all types immutable, so everything here is safe
to call from concurrent workers.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from .constants import (
    GAMMA_E_MHZ_PER_G,
    GAMMA_N15_MHZ_PER_G,
    N15_HYPERFINE_PAR_MHZ,
    N15_HYPERFINE_PERP_MHZ,
    NV_AXIS_PHI_DEG,
    NV_AXIS_THETA_DEG,
    ZFS_NV_MHZ,
)
from .errors import DegeneracyError

HERMITICITY_RTOL = 1e-12


def spin_operators(spin: float) -> tuple[np.ndarray, np.ndarray, np.ndarray]:
    """Return (Sx, Sy, Sz) for a spin-1/2 or spin-1 particle.

    Matrices are complex, dimension 2*spin + 1, in the descending-m basis
    (m = +spin first).
    """
    if spin not in (0.5, 1.0):
        raise ValueError(f"spin must be 1/2 or 1, got {spin}")
    dim = int(round(2 * spin + 1))
    m = spin - np.arange(dim)
    # ladder matrix elements <m+1|S+|m> = sqrt(s(s+1) - m(m+1))
    lp = np.sqrt(spin * (spin + 1) - m[1:] * (m[1:] + 1))
    sp = np.zeros((dim, dim), dtype=complex)
    sp[np.arange(dim - 1), np.arange(1, dim)] = lp
    sx = 0.5 * (sp + sp.conj().T)
    sy = -0.5j * (sp - sp.conj().T)
    sz = np.diag(m).astype(complex)
    return sx, sy, sz


@dataclass(frozen=True)
class SpinSpecies:
    """A spin species: quantum number, gyromagnetic ratio (MHz/G), label."""

    spin: float
    gyro: float
    label: str = ""

    def __post_init__(self):
        if self.spin not in (0.5, 1.0):
            raise ValueError(f"spin must be 1/2 or 1, got {self.spin}")
        if not math.isfinite(self.gyro):
            raise ValueError("gyro must be finite")

    @property
    def dim(self) -> int:
        return int(round(2 * self.spin + 1))


@dataclass(frozen=True)
class EulerAngles:
    """ZYZ Euler angles in degrees, normalized on construction.

    Stored with alpha, gamma in [0, 360) and beta in [0, 180], using the
    identity R(a, b, g) = R(a + 180, -b, g + 180) to fold beta.
    """

    alpha: float
    beta: float
    gamma: float = 0.0

    def __post_init__(self):
        a, b, g = float(self.alpha), float(self.beta), float(self.gamma)
        b = b % 360.0
        if b > 180.0:
            b = 360.0 - b
            a += 180.0
            g += 180.0
        object.__setattr__(self, "alpha", a % 360.0)
        object.__setattr__(self, "beta", b)
        object.__setattr__(self, "gamma", g % 360.0)


def rotation_matrix(angles: EulerAngles) -> np.ndarray:
    """Rotation matrix mapping crystal-frame components to principal-frame.

    For v_principal = R v_crystal the matrix is

        [ cg*cb*ca - sg*sa    cg*cb*sa + sg*ca   -cg*sb ]
        [-sg*cb*ca - cg*sa   -sg*cb*sa + cg*ca    sg*sb ]
        [ sb*ca               sb*sa               cb    ]

    with (ca, sa) = cos/sin(alpha) etc. Orthogonal with determinant +1.
    """
    a = math.radians(angles.alpha)
    b = math.radians(angles.beta)
    g = math.radians(angles.gamma)
    ca, sa = math.cos(a), math.sin(a)
    cb, sb = math.cos(b), math.sin(b)
    cg, sg = math.cos(g), math.sin(g)
    return np.array(
        [
            [cg * cb * ca - sg * sa, cg * cb * sa + sg * ca, -cg * sb],
            [-sg * cb * ca - cg * sa, -sg * cb * sa + cg * ca, sg * sb],
            [sb * ca, sb * sa, cb],
        ]
    )


@dataclass(frozen=True)
class HyperfineTensor:
    """Hyperfine tensor: principal values (MHz) plus orientation.

    Axial tensors (ax == ay) ignore gamma; it is stored as 0 in that case.
    """

    ax: float
    ay: float
    az: float
    orientation: EulerAngles

    def __post_init__(self):
        for v in (self.ax, self.ay, self.az):
            if not math.isfinite(v):
                raise ValueError("principal values must be finite")
        if self.axial and self.orientation.gamma != 0.0:
            o = self.orientation
            object.__setattr__(
                self, "orientation", EulerAngles(o.alpha, o.beta, 0.0)
            )

    @property
    def axial(self) -> bool:
        return self.ax == self.ay

    @classmethod
    def from_axial(
        cls, a_perp: float, a_par: float, alpha: float, beta: float
    ) -> "HyperfineTensor":
        """Axially symmetric tensor diag[a_perp, a_perp, a_par]."""
        return cls(a_perp, a_perp, a_par, EulerAngles(alpha, beta, 0.0))


def tensor_in_crystal_frame(t: HyperfineTensor) -> np.ndarray:
    """Crystal-frame components R^T . diag[ax, ay, az] . R (symmetric 3x3)."""
    r = rotation_matrix(t.orientation)
    return r.T @ np.diag([t.ax, t.ay, t.az]) @ r


@dataclass(frozen=True)
class FieldVector:
    """Static magnetic field: strength (Gauss) and crystal-frame direction.

    Cartesian components are B0 (sin(theta) cos(phi), sin(theta) sin(phi),
    cos(theta)).
    """

    b0: float
    theta: float
    phi: float = 0.0

    def __post_init__(self):
        if not (math.isfinite(self.b0) and self.b0 >= 0):
            raise ValueError(f"b0 must be finite and >= 0, got {self.b0}")

    def unit_vector(self) -> np.ndarray:
        th = math.radians(self.theta)
        ph = math.radians(self.phi)
        return np.array(
            [
                math.sin(th) * math.cos(ph),
                math.sin(th) * math.sin(ph),
                math.cos(th),
            ]
        )

    def cartesian(self) -> np.ndarray:
        return self.b0 * self.unit_vector()


@dataclass(frozen=True)
class DipolarGeometry:
    """Relative position of an X defect: distance r (nm) and direction.

    (zeta, xi) are the polar/azimuthal angles (degrees) of the interatomic
    unit vector in the NV molecular frame (z along the NV axis).
    """

    r: float
    zeta: float
    xi: float

    def __post_init__(self):
        if not (math.isfinite(self.r) and self.r > 0):
            raise ValueError(f"r must be positive, got {self.r}")

    def unit_vector(self) -> np.ndarray:
        z = math.radians(self.zeta)
        x = math.radians(self.xi)
        return np.array(
            [
                math.sin(z) * math.cos(x),
                math.sin(z) * math.sin(x),
                math.cos(z),
            ]
        )


def _default_nv_electron() -> SpinSpecies:
    return SpinSpecies(1.0, GAMMA_E_MHZ_PER_G, "nv-electron")


def _default_nv_nucleus() -> SpinSpecies:
    return SpinSpecies(0.5, GAMMA_N15_MHZ_PER_G, "n15")


def _default_n15_tensor() -> HyperfineTensor:
    # axial about the NV axis
    return HyperfineTensor.from_axial(
        N15_HYPERFINE_PERP_MHZ,
        N15_HYPERFINE_PAR_MHZ,
        NV_AXIS_PHI_DEG,
        NV_AXIS_THETA_DEG,
    )


@dataclass(frozen=True)
class NvSpec:
    """NV center parameters: ZFS, molecular axis, host nucleus."""

    zfs: float = ZFS_NV_MHZ
    axis_theta: float = NV_AXIS_THETA_DEG
    axis_phi: float = NV_AXIS_PHI_DEG
    n15_hyperfine: HyperfineTensor = field(default_factory=_default_n15_tensor)
    electron: SpinSpecies = field(default_factory=_default_nv_electron)
    nucleus: SpinSpecies = field(default_factory=_default_nv_nucleus)

    def __post_init__(self):
        if not self.zfs > 0:
            raise ValueError("zfs must be positive")
        if self.electron.spin != 1.0:
            raise ValueError("NV electron must be spin 1")
        if self.nucleus.spin != 0.5:
            raise ValueError("NV nucleus must be spin 1/2")
        if self.electron.gyro == 0:
            raise ValueError("electron gyro must be nonzero")

    def axis_vector(self) -> np.ndarray:
        th = math.radians(self.axis_theta)
        ph = math.radians(self.axis_phi)
        return np.array(
            [
                math.sin(th) * math.cos(ph),
                math.sin(th) * math.sin(ph),
                math.cos(th),
            ]
        )


def _default_x_electron() -> SpinSpecies:
    return SpinSpecies(0.5, GAMMA_E_MHZ_PER_G, "x-electron")


def _default_x_nucleus() -> SpinSpecies:
    # species unknown; nuclear Zeeman is off by default in the X fits anyway
    return SpinSpecies(0.5, 0.0, "x-nucleus")


@dataclass(frozen=True)
class XDefectSpec:
    """An unknown defect: electron 1/2 hyperfine-coupled to a nucleus 1/2."""

    label: str
    hyperfine: HyperfineTensor
    geometry: DipolarGeometry
    electron: SpinSpecies = field(default_factory=_default_x_electron)
    nucleus: SpinSpecies = field(default_factory=_default_x_nucleus)

    def __post_init__(self):
        if self.electron.spin != 0.5 or self.nucleus.spin != 0.5:
            raise ValueError("X defect spins must both be 1/2")
        if self.electron.gyro == 0:
            raise ValueError("electron gyro must be nonzero")


@dataclass(frozen=True)
class SpinSystemSpec:
    """Full system: the NV plus an ordered list of X defects."""

    nv: NvSpec
    defects: tuple[XDefectSpec, ...] = ()

    def __post_init__(self):
        object.__setattr__(self, "defects", tuple(self.defects))
        labels = [d.label for d in self.defects]
        if len(set(labels)) != len(labels):
            raise ValueError(f"defect labels must be unique, got {labels}")

    def defect(self, label: str) -> XDefectSpec:
        for d in self.defects:
            if d.label == label:
                return d
        raise KeyError(label)


@dataclass(frozen=True)
class HermitianOperator:
    """Dense complex Hermitian matrix with labeled tensor-product basis.

    ``basis`` is an ordered tuple of (label, dimension) pairs whose
    dimensions must multiply to the matrix dimension. Hermiticity is
    enforced to 1e-12 relative on construction.
    """

    entries: np.ndarray
    basis: tuple[tuple[str, int], ...]

    def __post_init__(self):
        m = np.asarray(self.entries, dtype=complex)
        if m.ndim != 2 or m.shape[0] != m.shape[1]:
            raise ValueError(f"entries must be square, got shape {m.shape}")
        expected = 1
        for _, d in self.basis:
            expected *= d
        if expected != m.shape[0]:
            raise ValueError(
                f"basis dims product {expected} != matrix dim {m.shape[0]}"
            )
        scale = max(np.max(np.abs(m)), 1.0)
        if np.max(np.abs(m - m.conj().T)) > HERMITICITY_RTOL * scale:
            raise ValueError("matrix is not Hermitian within 1e-12 relative")
        m = m.copy()
        m.flags.writeable = False
        object.__setattr__(self, "entries", m)
        object.__setattr__(self, "basis", tuple(self.basis))

    @property
    def dim(self) -> int:
        return self.entries.shape[0]


def zeeman_hamiltonian(
    species: SpinSpecies, fieldvec: FieldVector
) -> HermitianOperator:
    """Zeeman term gyro * B0 * (n . S) for the given species.

    Eigenvalues are +-omega/2 for spin 1/2 and {-omega, 0, +omega} for
    spin 1, with omega = gyro * b0 (MHz).
    """
    sx, sy, sz = spin_operators(species.spin)
    n = fieldvec.unit_vector()
    h = species.gyro * fieldvec.b0 * (n[0] * sx + n[1] * sy + n[2] * sz)
    return HermitianOperator(h, ((species.label or "spin", species.dim),))


def x_defect_hamiltonian(
    x: XDefectSpec,
    fieldvec: FieldVector,
    include_nuclear_zeeman: bool = False,
) -> HermitianOperator:
    """4x4 static Hamiltonian of an X defect, basis (electron (x) nucleus).

    Electron Zeeman + S . A_crystal . I, plus the nuclear Zeeman term when
    requested (off by default: the hyperfine fits neglect it).
    """
    sx, sy, sz = spin_operators(0.5)
    se = (sx, sy, sz)
    eye = np.eye(2)
    n = fieldvec.unit_vector()
    a = tensor_in_crystal_frame(x.hyperfine)

    ze = x.electron.gyro * fieldvec.b0 * (n[0] * sx + n[1] * sy + n[2] * sz)
    h = np.kron(ze, eye)
    for j in range(3):
        for k in range(3):
            h += a[j, k] * np.kron(se[j], se[k])
    if include_nuclear_zeeman:
        zn = x.nucleus.gyro * fieldvec.b0 * (
            n[0] * sx + n[1] * sy + n[2] * sz
        )
        h += np.kron(eye, zn)
    return HermitianOperator(
        h, ((x.electron.label or "electron", 2), (x.nucleus.label or "nucleus", 2))
    )


def nv_frame_angles(nv: NvSpec, fieldvec: FieldVector) -> tuple[float, float]:
    """Field direction in the NV molecular frame: (theta', phi') in degrees.

    theta' in [0, 180] is the angle off the NV axis; phi' in (-180, 180].
    """
    r = rotation_matrix(EulerAngles(nv.axis_phi, nv.axis_theta, 0.0))
    n = r @ fieldvec.unit_vector()
    # atan2 form stays accurate for near-aligned fields where acos loses
    # half the significant digits
    theta_p = math.degrees(math.atan2(math.hypot(n[0], n[1]), n[2]))
    phi_p = math.degrees(math.atan2(n[1], n[0]))
    return theta_p, phi_p


def nv_hamiltonian(
    nv: NvSpec,
    fieldvec: FieldVector,
    include_nuclear_zeeman: bool = True,
) -> HermitianOperator:
    """6x6 NV Hamiltonian in the NV molecular frame.

    Basis (m_s = +1, 0, -1) (x) (nuclear up, down). Terms: ZFS Delta*Sz^2
    along the molecular axis, electron Zeeman, hyperfine with the host
    nucleus, and (by default) the nuclear Zeeman, which sets the m_s = 0
    nuclear frequency.
    """
    sx1, sy1, sz1 = spin_operators(1.0)
    ix, iy, iz = spin_operators(0.5)
    se = (sx1, sy1, sz1)
    si = (ix, iy, iz)
    eye3, eye2 = np.eye(3), np.eye(2)

    r = rotation_matrix(EulerAngles(nv.axis_phi, nv.axis_theta, 0.0))
    n = r @ fieldvec.unit_vector()
    a = r @ tensor_in_crystal_frame(nv.n15_hyperfine) @ r.T

    ze = nv.electron.gyro * fieldvec.b0 * sum(
        n[i] * se[i] for i in range(3)
    )
    h = nv.zfs * np.kron(sz1 @ sz1, eye2) + np.kron(ze, eye2)
    for j in range(3):
        for k in range(3):
            h += a[j, k] * np.kron(se[j], si[k])
    if include_nuclear_zeeman:
        zn = nv.nucleus.gyro * fieldvec.b0 * sum(
            n[i] * si[i] for i in range(3)
        )
        h += np.kron(eye3, zn)
    return HermitianOperator(
        h, ((nv.electron.label or "nv-electron", 3), (nv.nucleus.label or "nucleus", 2))
    )


def eigensystem(
    h: HermitianOperator | np.ndarray,
) -> tuple[np.ndarray, np.ndarray]:
    """Eigenvalues (ascending) and eigenvectors of a Hermitian matrix.

    Columns of the second return value are the eigenvectors. Rejects
    non-Hermitian input beyond 1e-12 relative. Deterministic for identical
    input (LAPACK with fixed ordering).
    """
    m = h.entries if isinstance(h, HermitianOperator) else np.asarray(h, complex)
    scale = max(np.max(np.abs(m)), 1.0)
    if np.max(np.abs(m - m.conj().T)) > HERMITICITY_RTOL * scale:
        raise ValueError("matrix is not Hermitian within 1e-12 relative")
    evals, evecs = np.linalg.eigh(m)
    return evals, evecs


def adiabatic_labels(
    eigvecs: np.ndarray,
    references: np.ndarray,
    min_overlap: float = 0.5,
) -> list[int]:
    """Match eigenvectors to reference states by maximal overlap.

    For each reference column, returns the index of the eigenvector column
    with the largest |<ref|vec>|^2. Raises DegeneracyError when the best
    overlap falls below ``min_overlap`` or two references claim the same
    eigenvector (adiabatic labeling breaks down at mixed level crossings).
    """
    overlaps = np.abs(references.conj().T @ eigvecs) ** 2
    picks: list[int] = []
    for i in range(overlaps.shape[0]):
        j = int(np.argmax(overlaps[i]))
        if overlaps[i, j] < min_overlap:
            raise DegeneracyError(
                f"eigenstate overlap {overlaps[i, j]:.3f} < {min_overlap}; "
                "levels too mixed to label adiabatically"
            )
        picks.append(j)
    if len(set(picks)) != len(picks):
        raise DegeneracyError(
            "two reference states map to the same eigenvector; "
            "levels too mixed to label adiabatically"
        )
    return picks
