"""Persistence and interchange: OBJ/PLY loading, label sidecars, template
registry, candidate-set records, append-only annotation log, dataset export.

All record logs are line-delimited JSON: append-safe, human-inspectable,
and trivially mergeable across annotator machines. Quaternions serialize as
(w, x, y, z) with 17 significant digits for exact round-trip.
"""

from __future__ import annotations

import hashlib
import json
import struct
import time
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np
import yaml

from .candidates import CANDIDATE_TAGS, Candidate, CandidateSet
from .errors import DataFormatError, InvalidInputError, StaleAnnotationError
from .geometry import LabeledCloud, Rotation, normalize_to_unit_sphere, rotate
from .metrics import SymmetrySpec
from .stability import Mesh
from .templates import CategoryTemplate

DEFAULT_SAMPLE_COUNT = 4096
DISCARD_REASONS = (
    "quality-thin-shell",
    "quality-meaningless",
    "quality-incomplete",
    "misclassified",
    "pose-error-none-correct",
    "other",
)
POSE_ERROR_REASONS = ("pose-error-none-correct",)


def _fmt(x: float) -> str:
    return f"{x:.17g}"


def quat_to_strings(q: np.ndarray) -> list[str]:
    return [_fmt(float(v)) for v in q]


# ---------------------------------------------------------------- mesh I/O


def load_obj(path: str | Path) -> Mesh:
    """Minimal OBJ reader: v and f records, polygons fan-triangulated."""
    path = Path(path)
    verts, faces = [], []
    try:
        text = path.read_text()
    except OSError as exc:
        raise DataFormatError(f"cannot read {path}: {exc}") from exc
    for line in text.splitlines():
        parts = line.split()
        if not parts:
            continue
        if parts[0] == "v":
            verts.append([float(v) for v in parts[1:4]])
        elif parts[0] == "f":
            idx = [int(p.split("/")[0]) for p in parts[1:]]
            idx = [i - 1 if i > 0 else len(verts) + i for i in idx]
            for k in range(1, len(idx) - 1):
                faces.append([idx[0], idx[k], idx[k + 1]])
    if not verts:
        raise DataFormatError(f"{path}: no vertices found")
    return Mesh(np.array(verts), np.array(faces if faces else np.empty((0, 3), dtype=np.int64)))


def save_obj(path: str | Path, mesh: Mesh) -> None:
    with open(path, "w") as f:
        for v in mesh.vertices:
            f.write(f"v {_fmt(v[0])} {_fmt(v[1])} {_fmt(v[2])}\n")
        for a, b, c in mesh.faces:
            f.write(f"f {a + 1} {b + 1} {c + 1}\n")


_PLY_TYPES = {
    "char": "b", "uchar": "B", "int8": "b", "uint8": "B",
    "short": "h", "ushort": "H", "int16": "h", "uint16": "H",
    "int": "i", "uint": "I", "int32": "i", "uint32": "I",
    "float": "f", "float32": "f", "double": "d", "float64": "d",
}


def load_ply(path: str | Path) -> tuple[np.ndarray, np.ndarray | None, np.ndarray | None]:
    """Read an ASCII or binary little-endian PLY; returns (vertices, colors, faces)."""
    path = Path(path)
    try:
        raw = path.read_bytes()
    except OSError as exc:
        raise DataFormatError(f"cannot read {path}: {exc}") from exc
    if not raw.startswith(b"ply"):
        raise DataFormatError(f"{path}: not a PLY file")
    end = raw.find(b"end_header\n")
    if end < 0:
        raise DataFormatError(f"{path}: missing end_header")
    header = raw[:end].decode("ascii", errors="replace").splitlines()
    body = raw[end + len(b"end_header\n"):]

    fmt = None
    elements: list[tuple[str, int, list[tuple[str, str, str | None]]]] = []
    for line in header[1:]:
        parts = line.split()
        if not parts or parts[0] == "comment":
            continue
        if parts[0] == "format":
            fmt = parts[1]
        elif parts[0] == "element":
            elements.append((parts[1], int(parts[2]), []))
        elif parts[0] == "property":
            if parts[1] == "list":
                elements[-1][2].append((parts[4], parts[3], parts[2]))
            else:
                elements[-1][2].append((parts[2], parts[1], None))
    if fmt not in ("ascii", "binary_little_endian"):
        raise DataFormatError(f"{path}: unsupported PLY format {fmt!r}")

    verts = colors = faces = None
    if fmt == "ascii":
        tokens = body.decode("ascii").split("\n")
        row = 0
        for name, count, props in elements:
            rows = [tokens[row + i].split() for i in range(count)]
            row += count
            if name == "vertex":
                verts, colors = _parse_vertex_rows(rows, props)
            elif name == "face":
                faces = _parse_face_rows_ascii(rows)
    else:
        off = 0
        for name, count, props in elements:
            if name == "vertex":
                codes = "".join(_PLY_TYPES[t] for _, t, _ in props)
                rec = struct.Struct("<" + codes)
                rows = [rec.unpack_from(body, off + i * rec.size) for i in range(count)]
                off += count * rec.size
                verts, colors = _parse_vertex_rows(rows, props)
            elif name == "face":
                fl = []
                for _ in range(count):
                    (cnt_type, idx_type) = (props[0][1], props[0][2])
                    cnt = struct.unpack_from("<" + _PLY_TYPES[cnt_type], body, off)[0]
                    off += struct.calcsize(_PLY_TYPES[cnt_type])
                    idx = struct.unpack_from("<" + _PLY_TYPES[idx_type] * cnt, body, off)
                    off += struct.calcsize(_PLY_TYPES[idx_type]) * cnt
                    for k in range(1, cnt - 1):
                        fl.append([idx[0], idx[k], idx[k + 1]])
                faces = np.array(fl, dtype=np.int64) if fl else None
    if verts is None:
        raise DataFormatError(f"{path}: no vertex element")
    return verts, colors, faces


def _parse_vertex_rows(rows, props):
    names = [p[0] for p in props]
    arr = np.array([[float(v) for v in r] for r in rows], dtype=np.float64)
    ix = [names.index(k) for k in ("x", "y", "z")]
    verts = arr[:, ix]
    colors = None
    if all(k in names for k in ("red", "green", "blue")):
        ic = [names.index(k) for k in ("red", "green", "blue")]
        colors = arr[:, ic]
        if colors.max() > 1.0:
            colors = colors / 255.0
    return verts, colors


def _parse_face_rows_ascii(rows):
    fl = []
    for r in rows:
        cnt = int(r[0])
        idx = [int(v) for v in r[1:1 + cnt]]
        for k in range(1, cnt - 1):
            fl.append([idx[0], idx[k], idx[k + 1]])
    return np.array(fl, dtype=np.int64) if fl else None


def save_ply(path: str | Path, cloud: LabeledCloud) -> None:
    """Write an ASCII PLY point cloud (colors as uchar when present)."""
    with open(path, "w") as f:
        f.write("ply\nformat ascii 1.0\n")
        f.write(f"element vertex {len(cloud)}\n")
        f.write("property double x\nproperty double y\nproperty double z\n")
        if cloud.colors is not None:
            f.write("property uchar red\nproperty uchar green\nproperty uchar blue\n")
        f.write("end_header\n")
        for i, p in enumerate(cloud.points):
            line = f"{_fmt(p[0])} {_fmt(p[1])} {_fmt(p[2])}"
            if cloud.colors is not None:
                c = np.clip(np.round(cloud.colors[i] * 255), 0, 255).astype(int)
                line += f" {c[0]} {c[1]} {c[2]}"
            f.write(line + "\n")


# ---------------------------------------------------------------- sampling


def sample_mesh(mesh: Mesh, count: int = DEFAULT_SAMPLE_COUNT, seed: int = 0) -> np.ndarray:
    """Surface-area-weighted point samples with a fixed seed."""
    mesh = mesh.cleaned()
    areas = mesh.face_areas()
    if len(areas) == 0 or areas.sum() < 1e-15:
        raise InvalidInputError("mesh has no sampleable area")
    rng = np.random.default_rng(seed)
    fidx = rng.choice(len(areas), size=count, p=areas / areas.sum())
    tri = mesh.vertices[mesh.faces[fidx]]
    u = np.sqrt(rng.random(count))
    v = rng.random(count)
    return ((1 - u)[:, None] * tri[:, 0]
            + (u * (1 - v))[:, None] * tri[:, 1]
            + (u * v)[:, None] * tri[:, 2])


# ---------------------------------------------------------------- labels


def load_labels(path: str | Path) -> tuple[np.ndarray, tuple[str, ...]]:
    """Sidecar format: header 'parts: a,b,c' then one part index per line."""
    path = Path(path)
    lines = [ln.strip() for ln in path.read_text().splitlines() if ln.strip()]
    if not lines or not lines[0].startswith("parts:"):
        raise DataFormatError(f"{path}: missing 'parts:' header")
    names = tuple(n.strip() for n in lines[0][len("parts:"):].split(",") if n.strip())
    try:
        labels = np.array([int(v) for v in lines[1:]], dtype=np.int64)
    except ValueError as exc:
        raise DataFormatError(f"{path}: non-integer label line: {exc}") from exc
    if labels.size and (labels.min() < 0 or labels.max() >= len(names)):
        raise DataFormatError(f"{path}: label index out of range for {len(names)} parts")
    return labels, names


def save_labels(path: str | Path, labels: np.ndarray, part_names: tuple[str, ...]) -> None:
    with open(path, "w") as f:
        f.write("parts: " + ",".join(part_names) + "\n")
        for v in labels:
            f.write(f"{int(v)}\n")


def load_object(path: str | Path, sample_count: int = DEFAULT_SAMPLE_COUNT,
                seed: int = 0) -> tuple[Mesh | None, LabeledCloud]:
    """Load a mesh (OBJ/PLY) or point-cloud PLY, sampling meshes to a cloud.

    A sidecar ``<stem>.labels`` file, when present, must match the final
    cloud point count.
    """
    path = Path(path)
    suffix = path.suffix.lower()
    colors = None
    if suffix == ".obj":
        mesh = load_obj(path)
        points = sample_mesh(mesh, sample_count, seed)
    elif suffix == ".ply":
        verts, colors, faces = load_ply(path)
        if faces is not None and len(faces):
            mesh = Mesh(verts, faces)
            points = sample_mesh(mesh, sample_count, seed)
            colors = None  # per-vertex colors do not transfer to samples
        else:
            mesh = None
            points = verts
    else:
        raise DataFormatError(f"{path}: unsupported format {suffix!r}")
    labels = part_names = None
    sidecar = path.with_suffix(".labels")
    if sidecar.exists():
        labels, part_names = load_labels(sidecar)
        if len(labels) != len(points):
            raise DataFormatError(
                f"{sidecar}: {len(labels)} labels for {len(points)} points")
    cloud = LabeledCloud(points=points, colors=colors, labels=labels, part_names=part_names)
    return mesh, cloud


# ------------------------------------------------------- template registry


def _parse_symmetry(spec) -> SymmetrySpec:
    if spec is None:
        return SymmetrySpec()
    axis = spec.get("axis", [0, 0, 1])
    angle = spec.get("angle", "none")
    if angle == "none" or angle is None:
        return SymmetrySpec(kind="none", axis=axis)
    if angle == "continuous":
        return SymmetrySpec(kind="continuous", axis=axis)
    return SymmetrySpec(kind="discrete", axis=axis, angle_deg=float(angle))


def load_template_registry(path: str | Path,
                           sample_count: int = DEFAULT_SAMPLE_COUNT) -> dict[str, CategoryTemplate]:
    """Registry manifest (JSON or YAML): category -> template path + symmetry."""
    path = Path(path)
    try:
        data = yaml.safe_load(path.read_text())
    except (OSError, yaml.YAMLError) as exc:
        raise DataFormatError(f"cannot parse registry {path}: {exc}") from exc
    entries = data.get("categories", data) if isinstance(data, dict) else data
    registry: dict[str, CategoryTemplate] = {}
    for e in entries:
        category = e["category"]
        tmpl_path = Path(e["template"])
        if not tmpl_path.is_absolute():
            tmpl_path = path.parent / tmpl_path
        _, cloud = load_object(tmpl_path, sample_count=sample_count)
        cloud, _ = normalize_to_unit_sphere(cloud)
        registry[category] = CategoryTemplate(
            category=category,
            cloud=cloud,
            symmetry=_parse_symmetry(e.get("symmetry")),
            axis_convention=e.get("axis_convention", ""),
            template_id=e.get("template_id", category),
        )
    return registry


# --------------------------------------------------- candidate-set records


def candidate_set_hash(cs: CandidateSet) -> str:
    """Platform-stable hash over the canonical decimal quaternion serialization."""
    parts = []
    for c in cs.candidates:
        parts.append(c.tag + ":" + ",".join(quat_to_strings(c.rotation.as_quat_wxyz())))
    return hashlib.sha256(";".join(parts).encode("ascii")).hexdigest()


def candidate_set_to_json(cs: CandidateSet) -> dict:
    return {
        "object_id": cs.object_id,
        "flags": list(cs.flags),
        "hash": candidate_set_hash(cs),
        "candidates": [
            {"tag": c.tag,
             "quat_wxyz": [float(v) for v in c.rotation.as_quat_wxyz()],
             "diagnostics": c.diagnostics}
            for c in cs.candidates
        ],
    }


def candidate_set_from_json(d: dict) -> CandidateSet:
    cands = tuple(
        Candidate(tag=c["tag"],
                  rotation=Rotation.from_quat_wxyz(np.array(c["quat_wxyz"])),
                  diagnostics=c.get("diagnostics", {}))
        for c in d["candidates"]
    )
    return CandidateSet(object_id=d["object_id"], candidates=cands,
                        flags=tuple(d.get("flags", [])))


def write_candidate_sets(path: str | Path, sets: list[CandidateSet]) -> None:
    with open(path, "w") as f:
        for cs in sets:
            f.write(json.dumps(candidate_set_to_json(cs), sort_keys=True) + "\n")


def read_candidate_sets(path: str | Path) -> dict[str, CandidateSet]:
    out = {}
    for line in Path(path).read_text().splitlines():
        if line.strip():
            cs = candidate_set_from_json(json.loads(line))
            out[cs.object_id] = cs
    return out


# ----------------------------------------------------------- pose records


@dataclass(frozen=True)
class PoseRecord:
    object_id: str
    rotation: Rotation
    source: str = "prediction"  # annotation | prediction | ground-truth

    def to_json(self) -> dict:
        return {"object_id": self.object_id,
                "quat_wxyz": [float(v) for v in self.rotation.as_quat_wxyz()],
                "source": self.source}

    @classmethod
    def from_json(cls, d: dict) -> "PoseRecord":
        return cls(object_id=d["object_id"],
                   rotation=Rotation.from_quat_wxyz(np.array(d["quat_wxyz"])),
                   source=d.get("source", "prediction"))


def write_pose_records(path: str | Path, records: list[PoseRecord]) -> None:
    with open(path, "w") as f:
        for r in records:
            f.write(json.dumps(r.to_json(), sort_keys=True) + "\n")


def read_pose_records(path: str | Path) -> list[PoseRecord]:
    out = []
    for line in Path(path).read_text().splitlines():
        if line.strip():
            out.append(PoseRecord.from_json(json.loads(line)))
    return out


# -------------------------------------------------------- annotation log


@dataclass(frozen=True)
class AnnotationRecord:
    object_id: str
    decision: str  # one of CANDIDATE_TAGS, or "discard"
    annotator_id: str
    elapsed_ms: float
    candidate_set_hash: str
    discard_reason: str | None = None
    timestamp: float = field(default_factory=time.time)

    def __post_init__(self):
        if self.decision == "discard":
            if self.discard_reason not in DISCARD_REASONS:
                raise InvalidInputError(
                    f"discard requires a reason from {DISCARD_REASONS}")
        elif self.decision not in CANDIDATE_TAGS:
            raise InvalidInputError(f"unknown decision {self.decision!r}")
        elif self.discard_reason is not None:
            raise InvalidInputError("discard_reason is only valid with decision='discard'")

    def to_json(self) -> dict:
        return {"object_id": self.object_id, "decision": self.decision,
                "discard_reason": self.discard_reason,
                "annotator_id": self.annotator_id, "elapsed_ms": self.elapsed_ms,
                "timestamp": self.timestamp,
                "candidate_set_hash": self.candidate_set_hash}

    @classmethod
    def from_json(cls, d: dict) -> "AnnotationRecord":
        return cls(object_id=d["object_id"], decision=d["decision"],
                   discard_reason=d.get("discard_reason"),
                   annotator_id=d["annotator_id"], elapsed_ms=d["elapsed_ms"],
                   timestamp=d.get("timestamp", 0.0),
                   candidate_set_hash=d.get("candidate_set_hash", ""))


def append_annotation(log_path: str | Path, record: AnnotationRecord) -> None:
    """Whole-line, flushed append; a crash never corrupts prior records."""
    line = json.dumps(record.to_json(), sort_keys=True) + "\n"
    with open(log_path, "a") as f:
        f.write(line)
        f.flush()


def read_annotations(log_path: str | Path) -> tuple[list[AnnotationRecord], int]:
    """All complete records plus a count of truncated/corrupt trailing lines."""
    path = Path(log_path)
    if not path.exists():
        return [], 0
    records, truncated = [], 0
    for line in path.read_text().splitlines():
        if not line.strip():
            continue
        try:
            records.append(AnnotationRecord.from_json(json.loads(line)))
        except (json.JSONDecodeError, KeyError, InvalidInputError):
            truncated += 1
    return records, truncated


def latest_decisions(records: list[AnnotationRecord]) -> tuple[dict[str, AnnotationRecord], int]:
    """Last-write-wins per object; returns (decisions, duplicate count)."""
    out: dict[str, AnnotationRecord] = {}
    duplicates = 0
    for r in records:
        if r.object_id in out:
            duplicates += 1
        out[r.object_id] = r
    return out, duplicates


# ---------------------------------------------------------------- export


def export_canonical(manifest: list[dict], annotations_path: str | Path,
                     candidate_sets: dict[str, CandidateSet],
                     out_dir: str | Path,
                     sample_count: int = DEFAULT_SAMPLE_COUNT) -> dict:
    """Apply each selected rotation and write canonicalized assets.

    ``manifest`` entries need object_id and path. Every object must be
    annotated (select or discard); selections must hash-match the stored
    candidate set. Returns the written summary.
    """
    out_dir = Path(out_dir)
    out_dir.mkdir(parents=True, exist_ok=True)
    records, _ = read_annotations(annotations_path)
    decisions, duplicates = latest_decisions(records)

    missing = [e["object_id"] for e in manifest if e["object_id"] not in decisions]
    if missing:
        raise InvalidInputError(f"objects without annotation: {missing}")

    retained, discard_counts = 0, {}
    for entry in manifest:
        oid = entry["object_id"]
        rec = decisions[oid]
        if rec.decision == "discard":
            discard_counts[rec.discard_reason] = discard_counts.get(rec.discard_reason, 0) + 1
            continue
        cs = candidate_sets.get(oid)
        if cs is None:
            raise InvalidInputError(f"no candidate set stored for {oid}")
        if rec.candidate_set_hash != candidate_set_hash(cs):
            raise StaleAnnotationError(
                f"{oid}: annotation hash does not match the stored candidate set")
        rotation = cs.by_tag(rec.decision).rotation
        mesh, cloud = load_object(entry["path"], sample_count=sample_count)
        save_ply(out_dir / f"{oid}.ply", rotate(cloud, rotation))
        if cloud.labels is not None and cloud.part_names is not None:
            save_labels(out_dir / f"{oid}.labels", cloud.labels, cloud.part_names)
        if mesh is not None:
            save_obj(out_dir / f"{oid}.obj", mesh.rotated(rotation))
        retained += 1

    total = len(manifest)
    pose_errors = sum(v for k, v in discard_counts.items() if k in POSE_ERROR_REASONS)
    quality = sum(discard_counts.values()) - pose_errors
    summary = {
        "total": total,
        "retained": retained,
        "retained_pct": 100.0 * retained / total if total else 0.0,
        "discarded_quality_pct": 100.0 * quality / total if total else 0.0,
        "discarded_pose_pct": 100.0 * pose_errors / total if total else 0.0,
        "discard_breakdown": dict(sorted(discard_counts.items())),
        "duplicate_annotations": duplicates,
    }
    with open(out_dir / "summary.json", "w") as f:
        json.dump(summary, f, indent=2, sort_keys=True)
    return summary
