"""Synthetic meshes and labeled clouds shared across the test suite."""

from __future__ import annotations

import numpy as np

from cano.geometry import LabeledCloud, normalize_to_unit_sphere
from cano.stability import Mesh
from cano.templates import CategoryTemplate

# 12 outward-oriented triangles of an axis-aligned box; vertex order:
# 0..3 bottom ring (x0y0, x1y0, x1y1, x0y1), 4..7 top ring.
_BOX_FACES = np.array([
    (0, 2, 1), (0, 3, 2),  # bottom (-z)
    (4, 5, 6), (4, 6, 7),  # top (+z)
    (0, 1, 5), (0, 5, 4),  # -y
    (2, 3, 7), (2, 7, 6),  # +y
    (0, 4, 7), (0, 7, 3),  # -x
    (1, 2, 6), (1, 6, 5),  # +x
])


def box_mesh(size=(1.0, 1.0, 1.0), center=(0.0, 0.0, 0.0)) -> Mesh:
    s = np.asarray(size, float) / 2.0
    c = np.asarray(center, float)
    x0, y0, z0 = c - s
    x1, y1, z1 = c + s
    verts = np.array([
        (x0, y0, z0), (x1, y0, z0), (x1, y1, z0), (x0, y1, z0),
        (x0, y0, z1), (x1, y0, z1), (x1, y1, z1), (x0, y1, z1),
    ])
    return Mesh(verts, _BOX_FACES)


def compound_mesh(*meshes: Mesh) -> Mesh:
    verts, faces, off = [], [], 0
    for m in meshes:
        verts.append(m.vertices)
        faces.append(m.faces + off)
        off += len(m.vertices)
    return Mesh(np.concatenate(verts), np.concatenate(faces))


def orient_outward(verts: np.ndarray, faces: np.ndarray) -> Mesh:
    """Flip faces of a convex shape so normals point away from the centroid."""
    verts = np.asarray(verts, float)
    faces = np.asarray(faces, np.int64).copy()
    center = verts.mean(axis=0)
    for i, (a, b, c) in enumerate(faces):
        n = np.cross(verts[b] - verts[a], verts[c] - verts[a])
        if n @ (verts[[a, b, c]].mean(axis=0) - center) < 0:
            faces[i] = (a, c, b)
    return Mesh(verts, faces)


def tetrahedron_mesh(scale: float = 1.0) -> Mesh:
    verts = scale * np.array([
        (1.0, 1.0, 1.0), (1.0, -1.0, -1.0), (-1.0, 1.0, -1.0), (-1.0, -1.0, 1.0)])
    faces = np.array([(1, 2, 3), (0, 3, 2), (0, 1, 3), (0, 2, 1)])
    return orient_outward(verts, faces)


def prism_mesh(n_sides: int = 12, radius: float = 1.0, height: float = 1.0,
               center=(0.0, 0.0, 0.0)) -> Mesh:
    """Closed n-gon prism (cylinder approximation), outward-oriented."""
    c = np.asarray(center, float)
    ang = 2 * np.pi * np.arange(n_sides) / n_sides
    ring = np.column_stack([radius * np.cos(ang), radius * np.sin(ang),
                            np.zeros(n_sides)])
    bot = ring + c - [0, 0, height / 2]
    top = ring + c + [0, 0, height / 2]
    verts = np.concatenate([bot, top, [c - [0, 0, height / 2]], [c + [0, 0, height / 2]]])
    cb, ct = 2 * n_sides, 2 * n_sides + 1
    faces = []
    for i in range(n_sides):
        j = (i + 1) % n_sides
        faces += [(i, j, n_sides + j), (i, n_sides + j, n_sides + i)]  # side
        faces += [(cb, j, i), (ct, n_sides + i, n_sides + j)]          # caps
    return Mesh(verts, np.array(faces))


def cantilever_mesh() -> Mesh:
    """Small foot with a heavy overhanging arm; CoM projects outside the foot."""
    foot = box_mesh(size=(0.2, 1.0, 0.5), center=(0.1, 0.5, 0.25))
    arm = box_mesh(size=(2.0, 1.0, 0.5), center=(1.0, 0.5, 0.75))
    return compound_mesh(foot, arm)


def l_shape_mesh() -> Mesh:
    """Two touching unit cubes: one at the origin, one stacked at +x."""
    return compound_mesh(box_mesh(center=(0.5, 0.5, 0.5)),
                         box_mesh(center=(1.5, 0.5, 0.5)))


def box_points(rng: np.random.Generator, n: int, size, center) -> np.ndarray:
    return np.asarray(center, float) + (rng.random((n, 3)) - 0.5) * np.asarray(size, float)


# Parameter sets for five distinct yaw- and polarity-asymmetric templates:
# a wide base slab, an off-center tower, and a nose at -x.
_TEMPLATE_PARAMS = [
    dict(slab=(1.6, 1.0, 0.2), tower=(0.4, 0.4, 0.7), tower_c=(0.40, 0.10, 0.55),
         nose=(0.3, 0.4, 0.2), nose_c=(-0.65, 0.10, 0.30)),
    dict(slab=(1.8, 0.9, 0.2), tower=(0.5, 0.3, 0.6), tower_c=(0.45, -0.15, 0.50),
         nose=(0.3, 0.3, 0.3), nose_c=(-0.70, 0.05, 0.35)),
    dict(slab=(1.4, 1.1, 0.25), tower=(0.3, 0.5, 0.8), tower_c=(0.35, 0.20, 0.60),
         nose=(0.4, 0.3, 0.2), nose_c=(-0.55, -0.20, 0.35)),
    dict(slab=(1.7, 0.8, 0.2), tower=(0.4, 0.4, 0.9), tower_c=(0.50, 0.05, 0.65),
         nose=(0.25, 0.45, 0.25), nose_c=(-0.60, -0.10, 0.32)),
    dict(slab=(1.5, 1.2, 0.3), tower=(0.5, 0.4, 0.6), tower_c=(0.30, 0.25, 0.60),
         nose=(0.35, 0.3, 0.25), nose_c=(-0.62, 0.15, 0.42)),
]

TEMPLATE_PART_NAMES = ("base", "tower", "nose")


def make_template(idx: int, n_points: int = 400,
                  seed: int = 1234) -> tuple[CategoryTemplate, Mesh]:
    """Labeled asymmetric template cloud plus a matching mesh, both expressed
    in the cloud's unit-sphere-normalized frame."""
    p = _TEMPLATE_PARAMS[idx % len(_TEMPLATE_PARAMS)]
    rng = np.random.default_rng(seed + idx)
    counts = (n_points // 2, (n_points - n_points // 2) * 3 // 5,
              n_points - n_points // 2 - (n_points - n_points // 2) * 3 // 5)
    slab_c = (0.0, 0.0, 0.1 + (p["slab"][2] - 0.2) / 2)
    pts = np.concatenate([
        box_points(rng, counts[0], p["slab"], slab_c),
        box_points(rng, counts[1], p["tower"], p["tower_c"]),
        box_points(rng, counts[2], p["nose"], p["nose_c"]),
    ])
    labels = np.concatenate([np.full(c, i) for i, c in enumerate(counts)])
    cloud = LabeledCloud(points=pts, labels=labels, part_names=TEMPLATE_PART_NAMES)
    cloud, tf = normalize_to_unit_sphere(cloud)
    mesh = compound_mesh(
        box_mesh(p["slab"], slab_c),
        box_mesh(p["tower"], p["tower_c"]),
        box_mesh(p["nose"], p["nose_c"]),
    )
    mesh = Mesh(tf.apply(mesh.vertices), mesh.faces)
    template = CategoryTemplate(category=f"synth{idx}", cloud=cloud,
                                template_id=f"synth{idx}")
    return template, mesh


def yaw_symmetric_pair(seed: int = 7, n_body: int = 240, n_marker: int = 60):
    """Template whose geometry is invariant under a 180-degree yaw but whose
    semantics are not: 'lens' and 'back' markers occupy mirrored positions.

    Returns (template_cloud, object_cloud) with the object being the template
    yawed by pi, so geometry cannot tell 0 from pi but labels can.
    """
    rng = np.random.default_rng(seed)
    half = box_points(rng, n_body // 2, (0.8, 0.5, 0.4), (0.45, 0.0, 0.0))
    body = np.concatenate([half, half * [-1, -1, 1]])  # exact 180-degree yaw copy
    lens = box_points(rng, n_marker // 2, (0.15, 0.15, 0.15), (0.95, 0.0, 0.0))
    back = lens * [-1, -1, 1]  # same geometry at the yawed position
    pts = np.concatenate([body, lens, back])
    labels = np.concatenate([
        np.zeros(n_body, dtype=int),
        np.ones(n_marker // 2, dtype=int),
        np.full(n_marker // 2, 2, dtype=int),
    ])
    template = LabeledCloud(points=pts, labels=labels,
                            part_names=("body", "lens", "back"))
    # the object is the template yawed by pi: lens sits where back was
    obj_pts = pts * [-1, -1, 1]
    obj = LabeledCloud(points=obj_pts, labels=labels,
                       part_names=("body", "lens", "back"))
    return template, obj


def ring_cloud(n_rings: int = 4, points_per_ring: int = 360) -> LabeledCloud:
    """Stack of rings: exactly invariant under 1-degree yaw steps."""
    pts = []
    for k in range(n_rings):
        r = 0.4 + 0.15 * k
        z = -0.3 + 0.2 * k
        ang = 2 * np.pi * np.arange(points_per_ring) / points_per_ring
        pts.append(np.column_stack([r * np.cos(ang), r * np.sin(ang),
                                    np.full(points_per_ring, z)]))
    return LabeledCloud(points=np.concatenate(pts))


def fibonacci_sphere(n: int = 2000) -> np.ndarray:
    i = np.arange(n) + 0.5
    phi = np.arccos(1 - 2 * i / n)
    theta = np.pi * (1 + 5 ** 0.5) * i
    return np.column_stack([np.sin(phi) * np.cos(theta),
                            np.sin(phi) * np.sin(theta), np.cos(phi)])
