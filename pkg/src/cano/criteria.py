"""Horizontal and vertical alignment criteria against a category template.

Horizontal alignment searches yaw (rotation about +z) on a dense grid with
optional golden-section refinement; the geometric criterion minimizes full
Chamfer distance, the semantic criterion maximizes a joint objective
exp(-E_s(theta)) * sum_k N(theta | omega_k, sigma) anchored at the local
minima omega_k of the geometric energy. The vertical PCA criterion builds
the four polarity-resolved frame alignments and picks the one with minimal
mean per-part Chamfer cost.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np
from scipy.spatial import cKDTree

from .errors import InvalidInputError, PcaDegenerateError, SemanticUnavailableError
from .geometry import LabeledCloud, Rotation, principal_axes
from .templates import CategoryTemplate

FLAT_PROFILE_EPS = 1e-9
_GOLDEN = (np.sqrt(5.0) - 1.0) / 2.0


@dataclass(frozen=True)
class CriterionConfig:
    grid_step: float = np.pi / 180.0      # radians
    refine: bool = True
    refine_tol: float = np.radians(0.05)  # golden-section bracket width
    gaussian_sigma: float = 1.0           # radians, anchor Gaussian std
    weight_floor: float = 1e-12           # keeps the semantic objective positive

    def __post_init__(self):
        n = 2.0 * np.pi / self.grid_step
        if abs(n - round(n)) > 1e-9:
            raise InvalidInputError("grid_step must divide 2*pi into an integer count")
        if self.gaussian_sigma <= 0:
            raise InvalidInputError("gaussian_sigma must be positive")

    @property
    def n_grid(self) -> int:
        return int(round(2.0 * np.pi / self.grid_step))

    def thetas(self) -> np.ndarray:
        return np.arange(self.n_grid) * self.grid_step


@dataclass
class EnergyProfile:
    thetas: np.ndarray
    e_g: np.ndarray
    e_s: np.ndarray | None = None
    extrema: np.ndarray | None = None  # indices of the omega set

    def __post_init__(self):
        if len(self.thetas) != len(self.e_g):
            raise InvalidInputError("thetas and e_g must have equal length")
        if self.e_s is not None and len(self.e_s) != len(self.thetas):
            raise InvalidInputError("e_s length mismatch")


def _rotate_z_batch(points: np.ndarray, thetas: np.ndarray) -> np.ndarray:
    """(T, n, 3) copies of points yawed by each theta."""
    c, s = np.cos(thetas), np.sin(thetas)
    x, y, z = points[:, 0], points[:, 1], points[:, 2]
    out = np.empty((len(thetas), len(points), 3))
    out[:, :, 0] = c[:, None] * x - s[:, None] * y
    out[:, :, 1] = s[:, None] * x + c[:, None] * y
    out[:, :, 2] = z
    return out


class YawChamfer:
    """Chamfer distance CD(template, R_z(theta) * object) as a function of yaw.

    Both KD-trees are built once; per-theta evaluation rotates query points
    instead of rebuilding indices (rigid invariance of nearest neighbors).
    """

    def __init__(self, obj_points: np.ndarray, tmpl_points: np.ndarray):
        if len(obj_points) == 0 or len(tmpl_points) == 0:
            raise InvalidInputError("yaw chamfer requires non-empty point sets")
        self.obj = np.asarray(obj_points, dtype=np.float64)
        self.tmpl = np.asarray(tmpl_points, dtype=np.float64)
        self._tree_obj = cKDTree(self.obj)
        self._tree_tmpl = cKDTree(self.tmpl)

    def profile(self, thetas: np.ndarray, chunk: int = 64) -> np.ndarray:
        out = np.empty(len(thetas))
        for lo in range(0, len(thetas), chunk):
            th = thetas[lo:lo + chunk]
            # template -> rotated object == inverse-rotated template -> object
            rt = _rotate_z_batch(self.tmpl, -th)
            _, idx = self._tree_obj.query(rt.reshape(-1, 3))
            d1 = ((rt.reshape(-1, 3) - self.obj[idx]) ** 2).sum(axis=1)
            ro = _rotate_z_batch(self.obj, th)
            _, idx = self._tree_tmpl.query(ro.reshape(-1, 3))
            d2 = ((ro.reshape(-1, 3) - self.tmpl[idx]) ** 2).sum(axis=1)
            out[lo:lo + chunk] = (d1.reshape(len(th), -1).mean(axis=1)
                                  + d2.reshape(len(th), -1).mean(axis=1))
        return out

    def at(self, theta: float) -> float:
        return float(self.profile(np.array([theta]))[0])


class MeanPartYawChamfer:
    """Mean of per-part yaw Chamfer energies over shared semantic parts."""

    def __init__(self, parts: list[tuple[np.ndarray, np.ndarray]]):
        if not parts:
            raise SemanticUnavailableError("no shared semantic parts")
        self._solvers = [YawChamfer(o, t) for o, t in parts]

    def profile(self, thetas: np.ndarray) -> np.ndarray:
        return np.mean([s.profile(thetas) for s in self._solvers], axis=0)

    def at(self, theta: float) -> float:
        return float(np.mean([s.at(theta) for s in self._solvers]))


def shared_parts(obj: LabeledCloud, tmpl: LabeledCloud) -> list[tuple[str, np.ndarray, np.ndarray]]:
    """(name, object points, template points) for parts populated on both sides."""
    if obj.labels is None or tmpl.labels is None or not obj.part_names or not tmpl.part_names:
        return []
    out = []
    for name in tmpl.part_names:
        if name not in obj.part_names:
            continue
        po = obj.points[obj.labels == obj.part_names.index(name)]
        pt = tmpl.points[tmpl.labels == tmpl.part_names.index(name)]
        if len(po) and len(pt):
            out.append((name, po, pt))
    return out


def _golden_section(f, a: float, b: float, tol: float) -> float:
    """Minimize a unimodal f over [a, b] to bracket width tol."""
    x1 = b - _GOLDEN * (b - a)
    x2 = a + _GOLDEN * (b - a)
    f1, f2 = f(x1), f(x2)
    while b - a > tol:
        if f1 <= f2:
            b, x2, f2 = x2, x1, f1
            x1 = b - _GOLDEN * (b - a)
            f1 = f(x1)
        else:
            a, x1, f1 = x1, x2, f2
            x2 = a + _GOLDEN * (b - a)
            f2 = f(x2)
    return (a + b) / 2.0


@dataclass(frozen=True)
class GeometricYawResult:
    r_g: Rotation
    r_invg: Rotation
    profile: EnergyProfile
    theta_star: float
    continuous_symmetry: bool = False


def horizontal_geometric(obj: LabeledCloud, template: CategoryTemplate,
                         cfg: CriterionConfig = CriterionConfig()) -> GeometricYawResult:
    """Yaw minimizing Chamfer distance to the template, plus its 180-degree flip."""
    solver = YawChamfer(obj.points, template.cloud.points)
    thetas = cfg.thetas()
    e_g = solver.profile(thetas)
    profile = EnergyProfile(thetas=thetas, e_g=e_g)
    if e_g.max() - e_g.min() < FLAT_PROFILE_EPS:
        return GeometricYawResult(Rotation.identity(), Rotation.rot_z(np.pi),
                                  profile, 0.0, continuous_symmetry=True)
    i = int(np.argmin(e_g))
    theta = thetas[i]
    if cfg.refine:
        theta = _golden_section(solver.at, theta - cfg.grid_step, theta + cfg.grid_step,
                                cfg.refine_tol)
    theta = float(theta % (2.0 * np.pi))
    return GeometricYawResult(Rotation.rot_z(theta), Rotation.rot_z(theta + np.pi),
                              profile, theta)


def extrema_of_energy(profile: EnergyProfile) -> np.ndarray:
    """Cyclic local-minimum indices of e_g after 3-tap mean smoothing.

    Plateaus contribute their midpoint index; a flat profile yields {0}.
    """
    e = np.asarray(profile.e_g, dtype=np.float64)
    n = len(e)
    if n == 0:
        raise InvalidInputError("empty profile")
    if e.max() - e.min() < FLAT_PROFILE_EPS:
        return np.array([0])
    s = (np.roll(e, 1) + e + np.roll(e, -1)) / 3.0
    # cyclic run decomposition over equal smoothed values
    starts = [i for i in range(n) if s[i] != s[i - 1]]
    if not starts:
        return np.array([0])
    runs = []
    for k, st in enumerate(starts):
        en = starts[(k + 1) % len(starts)]
        length = (en - st) % n or n
        runs.append((st, length))
    minima = []
    for k, (st, length) in enumerate(runs):
        prev_val = s[runs[k - 1][0]]
        nxt_val = s[runs[(k + 1) % len(runs)][0]]
        val = s[st]
        if val < prev_val and val < nxt_val:
            minima.append((st + (length - 1) // 2) % n)
    if not minima:
        minima = [int(np.argmin(s))]
    return np.array(sorted(minima))


def _wrapped_gaussian(theta: np.ndarray, anchor: float, sigma: float) -> np.ndarray:
    """Wrapped normal density on the circle (three-term shift sum).

    Summing the +/- 2*pi images keeps the density smooth at the point
    antipodal to the anchor; a plain min-distance Gaussian has a cusp there
    that biases the maximizer away from an anchor sitting opposite another.
    """
    d = (theta - anchor + np.pi) % (2.0 * np.pi) - np.pi
    norm = 1.0 / (sigma * np.sqrt(2.0 * np.pi))
    two_s2 = 2.0 * sigma * sigma
    return norm * sum(np.exp(-(d + 2.0 * np.pi * n) ** 2 / two_s2) for n in (-1, 0, 1))


@dataclass(frozen=True)
class SemanticYawResult:
    r_s: Rotation
    profile: EnergyProfile
    theta_star: float


def horizontal_semantic(obj: LabeledCloud, template: CategoryTemplate,
                        cfg: CriterionConfig = CriterionConfig(),
                        geometric: GeometricYawResult | None = None) -> SemanticYawResult:
    """Yaw maximizing exp(-E_s) weighted by Gaussians at the geometric minima."""
    parts = shared_parts(obj, template.cloud)
    if not parts:
        raise SemanticUnavailableError(
            f"object and template {template.category!r} share no semantic parts")
    if geometric is None:
        geometric = horizontal_geometric(obj, template, cfg)
    thetas = geometric.profile.thetas
    omega = extrema_of_energy(geometric.profile)
    anchors = thetas[omega]
    semantic = MeanPartYawChamfer([(po, pt) for _, po, pt in parts])
    e_s = semantic.profile(thetas)

    def gauss_mix(th):
        th = np.asarray(th, dtype=np.float64)
        return sum(_wrapped_gaussian(th, a, cfg.gaussian_sigma) for a in anchors)

    j_grid = np.exp(-e_s) * gauss_mix(thetas) + cfg.weight_floor
    i = int(np.argmax(j_grid))
    theta = thetas[i]
    if cfg.refine:
        def neg_j(th):
            return -(np.exp(-semantic.at(th)) * float(gauss_mix(th)) + cfg.weight_floor)
        theta = _golden_section(neg_j, theta - cfg.grid_step, theta + cfg.grid_step,
                                cfg.refine_tol)
    theta = float(theta % (2.0 * np.pi))
    profile = EnergyProfile(thetas=thetas, e_g=geometric.profile.e_g, e_s=e_s, extrema=omega)
    return SemanticYawResult(Rotation.rot_z(theta), profile, theta)


_POLARITIES = ((1.0, 1.0), (1.0, -1.0), (-1.0, 1.0), (-1.0, -1.0))


def pca_candidate_rotations(obj: LabeledCloud, template: CategoryTemplate) -> list[Rotation]:
    """The four polarity-resolved frame alignments built from the first two
    principal axes of object and template, frames completed by cross product."""
    fo = principal_axes(obj)
    ft = principal_axes(template.cloud)
    if fo.degenerate or ft.degenerate:
        raise PcaDegenerateError("principal frame is ambiguous for object or template")
    bt = np.column_stack([ft.v1, ft.v2, np.cross(ft.v1, ft.v2)])
    out = []
    for s1, s2 in _POLARITIES:
        a1, a2 = s1 * fo.v1, s2 * fo.v2
        bo = np.column_stack([a1, a2, np.cross(a1, a2)])
        out.append(Rotation(bt @ bo.T))
    return out


@dataclass(frozen=True)
class PcaAlignResult:
    r_pca: Rotation
    costs: np.ndarray  # the four per-polarity semantic costs
    index: int
    ambiguous: bool


def pca_align(obj: LabeledCloud, template: CategoryTemplate) -> PcaAlignResult:
    """Pick the PCA polarity with minimal mean per-part Chamfer cost."""
    parts = shared_parts(obj, template.cloud)
    if not parts:
        raise SemanticUnavailableError(
            f"object and template {template.category!r} share no semantic parts")
    rotations = pca_candidate_rotations(obj, template)
    costs = np.array([semantic_cost(r, parts) for r in rotations])
    ambiguous = bool(costs.max() - costs.min() < 1e-9)
    index = 0 if ambiguous else int(np.argmin(costs))
    return PcaAlignResult(rotations[index], costs, index, ambiguous)


def semantic_cost(r: Rotation, parts: list[tuple[str, np.ndarray, np.ndarray]]) -> float:
    """Mean over parts of CD(template part, r applied to object part)."""
    from .geometry import chamfer_distance

    return float(np.mean([chamfer_distance(pt, r.apply(po)) for _, po, pt in parts]))
