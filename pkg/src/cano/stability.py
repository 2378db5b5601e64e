"""Static-equilibrium analysis: which convex-hull facets can the object rest on.

An object stands on a facet iff its center of mass projects inside the
facet's ground-plane polygon. Each resting facet yields an uprighting
rotation candidate; a pluggable scorer picks the preferred one.
"""

from __future__ import annotations

import subprocess
from dataclasses import dataclass
from pathlib import Path
from typing import Callable, Protocol, Sequence

import numpy as np
from scipy.spatial import ConvexHull, QhullError
from shapely.geometry import Point, Polygon

from .errors import DegenerateGeometryError, InvalidInputError, NoStablePoseError
from .geometry import Rotation, as_points

DOWN = np.array([0.0, 0.0, -1.0])
MARGIN_EPSILON = 1e-4


@dataclass(frozen=True)
class Mesh:
    """Triangle mesh: (n, 3) vertices, (m, 3) integer face indices."""

    vertices: np.ndarray
    faces: np.ndarray

    def __post_init__(self):
        v = as_points(self.vertices)
        f = np.ascontiguousarray(np.asarray(self.faces, dtype=np.int64))
        if f.ndim != 2 or f.shape[1] != 3:
            raise InvalidInputError(f"faces must be (m, 3) triangles, got {f.shape}")
        if f.size and (f.min() < 0 or f.max() >= len(v)):
            raise InvalidInputError("face index out of range")
        v.setflags(write=False)
        f.setflags(write=False)
        object.__setattr__(self, "vertices", v)
        object.__setattr__(self, "faces", f)

    def cleaned(self, area_eps: float = 1e-12) -> "Mesh":
        """Drop zero-area faces."""
        tri = self.vertices[self.faces]
        areas = 0.5 * np.linalg.norm(
            np.cross(tri[:, 1] - tri[:, 0], tri[:, 2] - tri[:, 0]), axis=1)
        return Mesh(self.vertices, self.faces[areas > area_eps])

    def rotated(self, r: Rotation) -> "Mesh":
        return Mesh(r.apply(self.vertices), self.faces)

    def face_areas(self) -> np.ndarray:
        tri = self.vertices[self.faces]
        return 0.5 * np.linalg.norm(
            np.cross(tri[:, 1] - tri[:, 0], tri[:, 2] - tri[:, 0]), axis=1)

    def is_watertight(self) -> bool:
        """Closed and consistently oriented: every undirected edge is shared
        by exactly two faces, traversed once in each direction."""
        if len(self.faces) == 0:
            return False
        edges = np.concatenate([self.faces[:, [0, 1]], self.faces[:, [1, 2]],
                                self.faces[:, [2, 0]]])
        _, directed_counts = np.unique(edges, axis=0, return_counts=True)
        if (directed_counts != 1).any():
            return False
        _, counts = np.unique(np.sort(edges, axis=1), axis=0, return_counts=True)
        return bool((counts == 2).all())


@dataclass(frozen=True)
class CenterOfMass:
    position: np.ndarray
    method: str  # "volume" (watertight solid) or "surface" (area-weighted shell)


@dataclass(frozen=True)
class SupportCandidate:
    """One hull facet the object could rest on."""

    facet_normal: np.ndarray        # outward unit normal, object frame
    rotation: Rotation              # maps facet_normal to (0, 0, -1)
    support_polygon: np.ndarray     # (k, 2) convex polygon, ground-plane coords
    com_margin: float               # signed distance of projected CoM to boundary
    polygon_area: float
    com_height: float               # CoM height above ground after uprighting
    valid: bool                     # com_margin > MARGIN_EPSILON


def center_of_mass(mesh: Mesh) -> CenterOfMass:
    """Uniform-density centroid.

    Watertight meshes use signed-tetrahedron integration of the enclosed
    solid; open meshes (or zero enclosed volume) fall back to the
    area-weighted surface centroid.
    """
    if len(mesh.faces) == 0:
        raise InvalidInputError("mesh has no faces")
    tri = mesh.vertices[mesh.faces]
    if mesh.is_watertight():
        v0, v1, v2 = tri[:, 0], tri[:, 1], tri[:, 2]
        signed = np.einsum("ij,ij->i", v0, np.cross(v1, v2)) / 6.0
        total = signed.sum()
        if abs(total) > 1e-12:
            centroid = (signed[:, None] * (v0 + v1 + v2) / 4.0).sum(axis=0) / total
            return CenterOfMass(centroid, "volume")
    areas = mesh.face_areas()
    total = areas.sum()
    if total < 1e-12:
        raise DegenerateGeometryError("mesh has no area")
    centroid = (areas[:, None] * tri.mean(axis=1)).sum(axis=0) / total
    return CenterOfMass(centroid, "surface")


def _rotation_to_down(normal: np.ndarray) -> Rotation:
    """Smallest rotation taking a unit vector onto (0, 0, -1)."""
    c = float(normal @ DOWN)
    axis = np.cross(normal, DOWN)
    s = np.linalg.norm(axis)
    if s < 1e-12:
        if c > 0:
            return Rotation.identity()
        return Rotation.about_axis([1.0, 0.0, 0.0], np.pi)
    return Rotation.about_axis(axis, float(np.arctan2(s, c)))


def _merge_hull_facets(hull: ConvexHull, merge_tol_rad: float) -> list[np.ndarray]:
    """Group hull simplices whose normals agree within the tolerance.

    Union-find over the hull adjacency graph; returns per-group simplex
    index arrays.
    """
    normals = hull.equations[:, :3]
    n = len(hull.simplices)
    parent = list(range(n))

    def find(i):
        while parent[i] != i:
            parent[i] = parent[parent[i]]
            i = parent[i]
        return i

    cos_tol = np.cos(merge_tol_rad)
    for i in range(n):
        for j in hull.neighbors[i]:
            if j < 0:
                continue
            if normals[i] @ normals[j] >= cos_tol:
                ri, rj = find(i), find(int(j))
                if ri != rj:
                    parent[rj] = ri
    groups: dict[int, list[int]] = {}
    for i in range(n):
        groups.setdefault(find(i), []).append(i)
    return [np.array(g) for g in groups.values()]


def signed_polygon_margin(polygon_xy: np.ndarray, point_xy: np.ndarray) -> float:
    """Distance of a 2D point to a convex polygon boundary; positive inside."""
    poly = Polygon(polygon_xy)
    pt = Point(point_xy)
    d = poly.exterior.distance(pt)
    return d if poly.contains(pt) else -d


def support_candidates(mesh: Mesh, merge_tolerance_deg: float = 2.0,
                       margin_epsilon: float = MARGIN_EPSILON) -> list[SupportCandidate]:
    """Enumerate convex-hull facets as resting poses, sorted by descending polygon area."""
    verts = mesh.vertices
    try:
        hull = ConvexHull(verts)
    except QhullError as exc:
        raise DegenerateGeometryError(f"convex hull failed: {exc}") from exc
    com = center_of_mass(mesh).position
    out: list[SupportCandidate] = []
    for group in _merge_hull_facets(hull, np.radians(merge_tolerance_deg)):
        areas2 = np.linalg.norm(np.cross(
            verts[hull.simplices[group, 1]] - verts[hull.simplices[group, 0]],
            verts[hull.simplices[group, 2]] - verts[hull.simplices[group, 0]]), axis=1)
        normal = (hull.equations[group, :3] * areas2[:, None]).sum(axis=0)
        normal /= np.linalg.norm(normal)
        rot = _rotation_to_down(normal)
        facet_verts = verts[np.unique(hull.simplices[group].ravel())]
        rotated = rot.apply(facet_verts)
        ground = rotated[:, 2].min()
        try:
            hull2d = ConvexHull(rotated[:, :2])
        except QhullError:
            continue  # needle facet, no footprint
        polygon = rotated[hull2d.vertices][:, :2]
        com_rot = rot.apply(com)
        margin = signed_polygon_margin(polygon, com_rot[:2])
        area = float(hull2d.volume)  # 2D hull: "volume" is the area
        out.append(SupportCandidate(
            facet_normal=normal,
            rotation=rot,
            support_polygon=polygon,
            com_margin=float(margin),
            polygon_area=area,
            com_height=float(com_rot[2] - ground),
            valid=margin > margin_epsilon,
        ))
    out.sort(key=lambda c: -c.polygon_area)
    return out


class UprightScorer(Protocol):
    def score(self, candidates: Sequence[SupportCandidate],
              mesh: Mesh | None = None) -> list[float]: ...


class HeuristicUprightScorer:
    """Default stand-in for the external upright chooser.

    Prefers a large footprint and a low center of mass:
    score = polygon_area - weight * com_height.
    """

    def __init__(self, height_weight: float = 1.0):
        self.height_weight = height_weight

    def score(self, candidates, mesh=None):
        return [c.polygon_area - self.height_weight * c.com_height for c in candidates]


class ExternalCommandScorer:
    """Shells out to an external scoring command.

    The command receives a preview directory and a manifest file listing one
    candidate id per line, and must print one ``id score`` line per candidate.
    Previews are PNG orthographic renders of the uprighted hull vertices.
    """

    def __init__(self, command: Sequence[str], workdir: str | Path):
        self.command = list(command)
        self.workdir = Path(workdir)

    def _write_preview(self, path: Path, mesh: Mesh, rot: Rotation) -> None:
        from PIL import Image, ImageDraw

        pts = rot.apply(mesh.vertices)[:, [0, 2]]  # front elevation (x, z)
        lo, hi = pts.min(axis=0), pts.max(axis=0)
        span = max(float((hi - lo).max()), 1e-9)
        size = 128
        img = Image.new("L", (size, size), 255)
        draw = ImageDraw.Draw(img)
        for x, z in (pts - lo) / span * (size - 9):
            draw.ellipse([x, size - 5 - z, x + 4, size - 1 - z], fill=0)
        img.save(path)

    def score(self, candidates, mesh=None):
        self.workdir.mkdir(parents=True, exist_ok=True)
        preview_dir = self.workdir / "previews"
        preview_dir.mkdir(exist_ok=True)
        manifest = self.workdir / "manifest.txt"
        ids = [str(i) for i in range(len(candidates))]
        with open(manifest, "w") as f:
            for cid, cand in zip(ids, candidates):
                if mesh is not None:
                    self._write_preview(preview_dir / f"{cid}.png", mesh, cand.rotation)
                f.write(cid + "\n")
        proc = subprocess.run(self.command + [str(preview_dir), str(manifest)],
                              capture_output=True, text=True, check=True)
        scores = {}
        for line in proc.stdout.splitlines():
            parts = line.split()
            if len(parts) == 2:
                scores[parts[0]] = float(parts[1])
        missing = [i for i in ids if i not in scores]
        if missing:
            raise InvalidInputError(f"external scorer returned no score for ids {missing}")
        return [scores[i] for i in ids]


def select_upright(candidates: Sequence[SupportCandidate],
                   scorer: UprightScorer | None = None,
                   mesh: Mesh | None = None) -> SupportCandidate:
    """Pick the equilibrium-valid candidate with the highest score.

    Ties break toward the earlier candidate in the (area-sorted) list.
    """
    valid = [c for c in candidates if c.valid]
    if not valid:
        raise NoStablePoseError("no equilibrium-valid support facet")
    scorer = scorer or HeuristicUprightScorer()
    scores = scorer.score(valid, mesh)
    best = max(range(len(valid)), key=lambda i: (scores[i], -i))
    return valid[best]
