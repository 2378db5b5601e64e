"""Point-cloud, rotation and distance primitives shared by all criteria.

All clouds are plain float64 arrays of shape (n, 3). Rotations are proper
(det = +1, orthonormal) 3x3 matrices wrapped in a small immutable type.
"""

from __future__ import annotations

from dataclasses import dataclass, field, replace

import numpy as np
from scipy.spatial import cKDTree

from .errors import DegenerateGeometryError, InvalidInputError

_ORTHO_TOL = 1e-6


def as_points(x) -> np.ndarray:
    """Coerce to a contiguous (n, 3) float64 array."""
    pts = np.ascontiguousarray(np.asarray(x, dtype=np.float64))
    if pts.ndim != 2 or pts.shape[1] != 3:
        raise InvalidInputError(f"expected (n, 3) points, got shape {pts.shape}")
    return pts


@dataclass(frozen=True)
class Rotation:
    """A proper rotation of 3-space stored as a 3x3 matrix."""

    matrix: np.ndarray

    def __post_init__(self):
        m = np.asarray(self.matrix, dtype=np.float64)
        if m.shape != (3, 3):
            raise InvalidInputError(f"rotation matrix must be 3x3, got {m.shape}")
        if not np.allclose(m.T @ m, np.eye(3), atol=_ORTHO_TOL):
            raise InvalidInputError("matrix is not orthonormal")
        if np.linalg.det(m) < 0:
            raise InvalidInputError("matrix is a reflection, not a rotation")
        m.setflags(write=False)
        object.__setattr__(self, "matrix", m)

    @classmethod
    def identity(cls) -> "Rotation":
        return cls(np.eye(3))

    @classmethod
    def rot_z(cls, theta: float) -> "Rotation":
        """Rotation by ``theta`` radians about the +z axis."""
        c, s = np.cos(theta), np.sin(theta)
        return cls(np.array([[c, -s, 0.0], [s, c, 0.0], [0.0, 0.0, 1.0]]))

    @classmethod
    def about_axis(cls, axis, theta: float) -> "Rotation":
        """Rodrigues rotation by ``theta`` radians about a (not necessarily unit) axis."""
        a = np.asarray(axis, dtype=np.float64)
        n = np.linalg.norm(a)
        if n < 1e-12:
            raise InvalidInputError("rotation axis must be nonzero")
        a = a / n
        k = np.array([[0.0, -a[2], a[1]], [a[2], 0.0, -a[0]], [-a[1], a[0], 0.0]])
        m = np.eye(3) + np.sin(theta) * k + (1.0 - np.cos(theta)) * (k @ k)
        return cls(m)

    @classmethod
    def from_quat_wxyz(cls, q) -> "Rotation":
        q = np.asarray(q, dtype=np.float64)
        if q.shape != (4,):
            raise InvalidInputError("quaternion must have 4 components (w, x, y, z)")
        n = np.linalg.norm(q)
        if abs(n - 1.0) > 1e-6:
            raise InvalidInputError(f"quaternion norm {n} is not 1 within 1e-6")
        w, x, y, z = q / n
        rot = cls(np.array([
            [1 - 2 * (y * y + z * z), 2 * (x * y - w * z), 2 * (x * z + w * y)],
            [2 * (x * y + w * z), 1 - 2 * (x * x + z * z), 2 * (y * z - w * x)],
            [2 * (x * z - w * y), 2 * (y * z + w * x), 1 - 2 * (x * x + y * y)],
        ]))
        # cache the (sign-fixed) input so serialize/parse round trips are
        # bit-exact; the matrix->quaternion extraction is not
        cached = _sign_fix_quat(q.copy())
        cached.setflags(write=False)
        object.__setattr__(rot, "_quat", cached)
        return rot

    @classmethod
    def random(cls, rng: np.random.Generator) -> "Rotation":
        """Haar-uniform random rotation (normalized 4D Gaussian quaternion)."""
        q = rng.normal(size=4)
        q /= np.linalg.norm(q)
        return cls.from_quat_wxyz(q)

    def compose(self, other: "Rotation") -> "Rotation":
        """self after other: (self @ other).apply(p) == self.apply(other.apply(p))."""
        return Rotation(self.matrix @ other.matrix)

    def __matmul__(self, other: "Rotation") -> "Rotation":
        return self.compose(other)

    def inverse(self) -> "Rotation":
        return Rotation(self.matrix.T.copy())

    def apply(self, points) -> np.ndarray:
        pts = np.asarray(points, dtype=np.float64)
        return pts @ self.matrix.T

    def as_quat_wxyz(self) -> np.ndarray:
        """Unit quaternion (w, x, y, z), sign-fixed so the first nonzero component is positive."""
        cached = getattr(self, "_quat", None)
        if cached is not None:
            return cached
        m = self.matrix
        t = np.trace(m)
        if t > 0:
            s = np.sqrt(t + 1.0) * 2
            q = np.array([0.25 * s, (m[2, 1] - m[1, 2]) / s,
                          (m[0, 2] - m[2, 0]) / s, (m[1, 0] - m[0, 1]) / s])
        else:
            i = int(np.argmax(np.diag(m)))
            j, k = (i + 1) % 3, (i + 2) % 3
            s = np.sqrt(max(m[i, i] - m[j, j] - m[k, k] + 1.0, 0.0)) * 2
            q = np.empty(4)
            q[0] = (m[k, j] - m[j, k]) / s
            q[1 + i] = 0.25 * s
            q[1 + j] = (m[j, i] + m[i, j]) / s
            q[1 + k] = (m[k, i] + m[i, k]) / s
        q /= np.linalg.norm(q)
        return _sign_fix_quat(q)


def _sign_fix_quat(q: np.ndarray) -> np.ndarray:
    for v in q:
        if abs(v) > 1e-12:
            if v < 0:
                q = -q
            break
    return q


@dataclass(frozen=True)
class LabeledCloud:
    """Points with optional per-point colors and semantic part labels."""

    points: np.ndarray
    colors: np.ndarray | None = None
    labels: np.ndarray | None = None
    part_names: tuple[str, ...] | None = None

    def __post_init__(self):
        pts = as_points(self.points)
        pts.setflags(write=False)
        object.__setattr__(self, "points", pts)
        n = len(pts)
        if self.colors is not None:
            col = np.ascontiguousarray(np.asarray(self.colors, dtype=np.float64))
            if col.shape != (n, 3):
                raise InvalidInputError(f"colors shape {col.shape} does not match {n} points")
            col.setflags(write=False)
            object.__setattr__(self, "colors", col)
        if self.labels is not None:
            lab = np.ascontiguousarray(np.asarray(self.labels, dtype=np.int64))
            if lab.shape != (n,):
                raise InvalidInputError(f"labels shape {lab.shape} does not match {n} points")
            if self.part_names is not None:
                m = len(self.part_names)
                if lab.size and (lab.min() < 0 or lab.max() >= m):
                    raise InvalidInputError("label index out of range for part_names")
            elif lab.size and lab.min() < 0:
                raise InvalidInputError("negative label index")
            lab.setflags(write=False)
            object.__setattr__(self, "labels", lab)
        if self.part_names is not None:
            object.__setattr__(self, "part_names", tuple(self.part_names))

    def __len__(self) -> int:
        return len(self.points)

    def part_points(self, name: str) -> np.ndarray:
        """Points belonging to the named semantic part (possibly empty)."""
        if self.labels is None or self.part_names is None:
            raise InvalidInputError("cloud has no semantic labels")
        idx = self.part_names.index(name)
        return self.points[self.labels == idx]


@dataclass(frozen=True)
class NormalizationTransform:
    """Translation-then-scale map taking the centroid to 0 and max radius to 1."""

    translation: np.ndarray
    scale: float

    def apply(self, points) -> np.ndarray:
        return (np.asarray(points, dtype=np.float64) + self.translation) * self.scale

    def invert(self, points) -> np.ndarray:
        return np.asarray(points, dtype=np.float64) / self.scale - self.translation


@dataclass(frozen=True)
class PcaFrame:
    """First two principal axes with a deterministic sign convention."""

    v1: np.ndarray
    v2: np.ndarray
    eigvals: np.ndarray
    degenerate: bool = False

    @property
    def v3(self) -> np.ndarray:
        return np.cross(self.v1, self.v2)


def normalize_to_unit_sphere(cloud: LabeledCloud) -> tuple[LabeledCloud, NormalizationTransform]:
    """Center the cloud at the origin and scale the farthest point to radius 1."""
    if len(cloud) == 0:
        raise InvalidInputError("cannot normalize an empty cloud")
    centroid = cloud.points.mean(axis=0)
    centered = cloud.points - centroid
    max_r = float(np.linalg.norm(centered, axis=1).max())
    if max_r < 1e-12:
        raise DegenerateGeometryError("all points coincide; zero extent")
    tf = NormalizationTransform(translation=-centroid, scale=1.0 / max_r)
    return replace(cloud, points=centered / max_r), tf


def chamfer_distance(a, b) -> float:
    """Bidirectional squared-distance Chamfer: mean NN(a->b)^2 + mean NN(b->a)^2.

    Nearest neighbors come from an exact KD-tree; distances are recomputed
    from the returned indices so the value matches a brute-force scan
    bit-for-bit.
    """
    a, b = as_points(a), as_points(b)
    if len(a) == 0 or len(b) == 0:
        raise InvalidInputError("chamfer distance requires non-empty point sets")
    _, ib = cKDTree(b).query(a)
    _, ia = cKDTree(a).query(b)
    d_ab = ((a - b[ib]) ** 2).sum(axis=1)
    d_ba = ((b - a[ia]) ** 2).sum(axis=1)
    return float(d_ab.mean() + d_ba.mean())


def _fix_axis_sign(axis: np.ndarray, centered: np.ndarray) -> np.ndarray:
    """Flip so the third moment along the axis is >= 0; ties toward a positive leading component."""
    m3 = float(np.mean((centered @ axis) ** 3))
    if m3 < -1e-12:
        return -axis
    if m3 <= 1e-12:
        for v in axis:
            if abs(v) > 1e-12:
                return axis if v > 0 else -axis
    return axis


def principal_axes(cloud: LabeledCloud, degeneracy_tol: float = 0.02) -> PcaFrame:
    """First two covariance eigenvectors with deterministic polarity.

    The frame is flagged degenerate when the lambda2/lambda3 (or lambda1/lambda2)
    eigengap is small relative to lambda1, i.e. the axes are not well determined.
    """
    pts = cloud.points
    if len(pts) < 4:
        raise InvalidInputError("principal axes require at least 4 points")
    centered = pts - pts.mean(axis=0)
    cov = centered.T @ centered / len(pts)
    w, v = np.linalg.eigh(cov)  # ascending eigenvalues
    lam = w[::-1]
    if lam[1] < 1e-12 * max(lam[0], 1e-300):
        raise DegenerateGeometryError("points are collinear; no second principal axis")
    gap = min(lam[0] - lam[1], lam[1] - lam[2])
    degenerate = gap < degeneracy_tol * max(lam[0], 1e-300) or gap < 1e-9
    v1 = _fix_axis_sign(v[:, 2].copy(), centered)
    v2 = _fix_axis_sign(v[:, 1].copy(), centered)
    return PcaFrame(v1=v1, v2=v2, eigvals=lam[:2].copy(), degenerate=degenerate)


def rotate(cloud: LabeledCloud, r: Rotation) -> LabeledCloud:
    """Rotate every point; labels and colors ride along unchanged."""
    return replace(cloud, points=r.apply(cloud.points))


def geodesic_angle(r1: Rotation, r2: Rotation) -> float:
    """Angular distance in degrees, arccos((trace(r1^T r2) - 1) / 2), in [0, 180]."""
    cos = (float(np.trace(r1.matrix.T @ r2.matrix)) - 1.0) / 2.0
    cos = min(1.0, max(-1.0, cos))
    if cos > 1.0 - 1e-12:  # guard arccos noise amplification at the identity
        return 0.0
    return float(np.degrees(np.arccos(cos)))
