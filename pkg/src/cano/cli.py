"""Command line interface: preprocess, candidates, serve, evaluate, export."""

from __future__ import annotations

import json
from concurrent.futures import ThreadPoolExecutor
from pathlib import Path

import click
import numpy as np

from . import dataio
from .candidates import generate_candidates
from .config import load_config
from .errors import UnregisteredCategoryError
from .geometry import normalize_to_unit_sphere
from .metrics import ErrorSample, accuracy_at, iqr, mean_abs_error
from .service import AnnotationStore, WorkItem, create_app, decimate


def _read_manifest(path: str | Path) -> list[dict]:
    data = json.loads(Path(path).read_text())
    return data["objects"] if isinstance(data, dict) else data


config_option = click.option("--config", "config_path", type=click.Path(exists=True),
                             default=None, help="YAML/JSON config file.")


@click.group()
def main():
    """Candidate-based 3D canonicalization toolkit."""


@main.command()
@click.option("--manifest", required=True, type=click.Path(exists=True),
              help="JSON list of {object_id, path, category}.")
@click.option("--out", "out_dir", required=True, type=click.Path())
@config_option
@click.option("--sample-count", type=int, default=None)
def preprocess(manifest, out_dir, config_path, sample_count):
    """Load objects, normalize to the unit sphere, write sampled clouds."""
    cfg = load_config(config_path, sample_count=sample_count)
    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)
    entries = _read_manifest(manifest)
    processed = []
    for e in entries:
        mesh, cloud = dataio.load_object(e["path"], sample_count=cfg.sample_count,
                                         seed=cfg.seed)
        cloud, tf = normalize_to_unit_sphere(cloud)
        ply = out / f"{e['object_id']}.ply"
        dataio.save_ply(ply, cloud)
        if cloud.labels is not None and cloud.part_names is not None:
            dataio.save_labels(ply.with_suffix(".labels"), cloud.labels, cloud.part_names)
        rec = {"object_id": e["object_id"], "path": str(ply),
               "category": e.get("category", ""),
               "source_path": str(e["path"]),
               "normalization": {"translation": tf.translation.tolist(),
                                 "scale": tf.scale}}
        if mesh is not None:
            rec["mesh_path"] = str(e["path"])
        processed.append(rec)
        click.echo(f"preprocessed {e['object_id']} ({len(cloud)} points)")
    (out / "manifest.json").write_text(json.dumps({"objects": processed}, indent=2))
    click.echo(f"wrote {out / 'manifest.json'}")


def _generate_for_entry(entry, registry, crit_cfg, sample_count, seed):
    category = entry.get("category", "")
    template = registry.get(category)
    if template is None:
        raise UnregisteredCategoryError(f"no template for category {category!r}")
    mesh, cloud = dataio.load_object(entry["path"], sample_count=sample_count, seed=seed)
    if mesh is None and "mesh_path" in entry:
        mesh, _ = dataio.load_object(entry["mesh_path"], sample_count=16, seed=seed)
    cloud, _ = normalize_to_unit_sphere(cloud)
    return generate_candidates(mesh, cloud, template, crit_cfg,
                               object_id=entry["object_id"])


@main.command("candidates")
@click.option("--manifest", required=True, type=click.Path(exists=True))
@click.option("--templates", "templates_path", required=True, type=click.Path(exists=True))
@click.option("--out", "out_path", required=True, type=click.Path())
@config_option
@click.option("--grid-step", "grid_step_deg", type=float, default=None)
@click.option("--sigma", "gaussian_sigma", type=float, default=None)
@click.option("--sample-count", type=int, default=None)
def candidates_cmd(manifest, templates_path, out_path, config_path,
                   grid_step_deg, gaussian_sigma, sample_count):
    """Generate one candidate-set record per manifest object."""
    cfg = load_config(config_path, grid_step_deg=grid_step_deg,
                      gaussian_sigma=gaussian_sigma, sample_count=sample_count)
    registry = dataio.load_template_registry(templates_path, sample_count=cfg.sample_count)
    entries = _read_manifest(manifest)
    crit = cfg.criterion_config()
    with ThreadPoolExecutor(max_workers=cfg.workers) as pool:
        sets = list(pool.map(
            lambda e: _generate_for_entry(e, registry, crit, cfg.sample_count, cfg.seed),
            entries))
    dataio.write_candidate_sets(out_path, sets)
    click.echo(f"wrote {len(sets)} candidate sets to {out_path}")


@main.command()
@click.option("--manifest", required=True, type=click.Path(exists=True))
@click.option("--templates", "templates_path", required=True, type=click.Path(exists=True))
@click.option("--candidates", "candidates_path", type=click.Path(exists=True), default=None,
              help="Precomputed candidate records; computed at startup when omitted.")
@click.option("--log", "log_path", required=True, type=click.Path())
@click.option("--port", type=int, default=8000)
@click.option("--host", default="127.0.0.1")
@click.option("--ui-dir", type=click.Path(), default=None)
@config_option
@click.option("--lease-seconds", type=float, default=None)
@click.option("--sample-count", type=int, default=None)
def serve(manifest, templates_path, candidates_path, log_path, port, host,
          ui_dir, config_path, lease_seconds, sample_count):
    """Run the annotation HTTP service."""
    import uvicorn

    cfg = load_config(config_path, lease_seconds=lease_seconds, sample_count=sample_count)
    store = build_store(manifest, templates_path, log_path, cfg,
                        candidates_path=candidates_path)
    app = create_app(store, ui_dir=ui_dir)
    click.echo(f"serving {len(store.order)} objects on {host}:{port}")
    uvicorn.run(app, host=host, port=port)


def build_store(manifest, templates_path, log_path, cfg, candidates_path=None):
    """Assemble the service work queue from manifest + templates (+ records)."""
    registry = dataio.load_template_registry(templates_path, sample_count=cfg.sample_count)
    entries = _read_manifest(manifest)
    precomputed = (dataio.read_candidate_sets(candidates_path)
                   if candidates_path else {})
    crit = cfg.criterion_config()
    items: dict[str, WorkItem] = {}
    order: list[str] = []
    with ThreadPoolExecutor(max_workers=cfg.workers) as pool:
        def build(entry):
            oid = entry["object_id"]
            template = registry.get(entry.get("category", ""))
            if template is None:
                raise UnregisteredCategoryError(
                    f"no template for category {entry.get('category')!r}")
            _, cloud = dataio.load_object(entry["path"], sample_count=cfg.sample_count,
                                          seed=cfg.seed)
            cloud, _ = normalize_to_unit_sphere(cloud)
            cs = precomputed.get(oid)
            if cs is None:
                cs = _generate_for_entry(entry, registry, crit, cfg.sample_count, cfg.seed)
            return WorkItem(object_id=oid, candidate_set=cs,
                            object_preview=decimate(cloud), template=template)
        for item in pool.map(build, entries):
            items[item.object_id] = item
            order.append(item.object_id)
    return AnnotationStore(items=items, order=order, log_path=Path(log_path),
                           lease_seconds=cfg.lease_seconds)


@main.command()
@click.option("--predictions", required=True, type=click.Path(exists=True))
@click.option("--ground-truth", "ground_truth", required=True, type=click.Path(exists=True))
@click.option("--symmetry", "symmetry_path", type=click.Path(exists=True), default=None,
              help="JSON/YAML mapping object_id -> {axis, angle}.")
@click.option("--report", "report_path", type=click.Path(), default=None)
def evaluate(predictions, ground_truth, symmetry_path, report_path):
    """Symmetry-aware pose metrics over prediction/ground-truth record files."""
    import yaml

    from .dataio import _parse_symmetry, read_pose_records
    from .metrics import NO_SYMMETRY

    preds = {r.object_id: r for r in read_pose_records(predictions)}
    gts = {r.object_id: r for r in read_pose_records(ground_truth)}
    syms = {}
    if symmetry_path:
        raw = yaml.safe_load(Path(symmetry_path).read_text()) or {}
        syms = {k: _parse_symmetry(v) for k, v in raw.items()}
    common = sorted(set(preds) & set(gts))
    if not common:
        raise click.ClickException("no common object ids between predictions and ground truth")
    samples = [ErrorSample(object_id=oid, predicted=preds[oid].rotation,
                           ground_truth=gts[oid].rotation,
                           symmetry=syms.get(oid, NO_SYMMETRY))
               for oid in common]
    report = {
        "count": len(samples),
        "acc_at_10_deg": accuracy_at(samples, 10.0),
        "acc_at_30_deg": accuracy_at(samples, 30.0),
        "abs_mean_deg": mean_abs_error(samples),
        "iqr_deg": iqr(samples),
    }
    click.echo(f"{'metric':<16}{'value':>12}")
    for k, v in report.items():
        click.echo(f"{k:<16}{v:>12.4f}")
    if report_path:
        Path(report_path).write_text(json.dumps(report, indent=2, sort_keys=True))
        click.echo(f"wrote {report_path}")


@main.command()
@click.option("--manifest", required=True, type=click.Path(exists=True))
@click.option("--candidates", "candidates_path", required=True, type=click.Path(exists=True))
@click.option("--log", "log_path", required=True, type=click.Path(exists=True))
@click.option("--out", "out_dir", required=True, type=click.Path())
@config_option
@click.option("--sample-count", type=int, default=None)
def export(manifest, candidates_path, log_path, out_dir, config_path, sample_count):
    """Apply selected rotations and write the canonicalized dataset."""
    cfg = load_config(config_path, sample_count=sample_count)
    entries = _read_manifest(manifest)
    sets = dataio.read_candidate_sets(candidates_path)
    summary = dataio.export_canonical(entries, log_path, sets, out_dir,
                                      sample_count=cfg.sample_count)
    click.echo(json.dumps(summary, indent=2, sort_keys=True))


if __name__ == "__main__":
    main()
