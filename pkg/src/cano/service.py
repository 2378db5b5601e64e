"""HTTP annotation service: dispatch objects, serve geometry, record decisions.

The append-only annotation log is the source of truth; leases are ephemeral
in-memory state rebuilt empty on restart. One lock guards the lease table
and completion set; appends funnel through the same lock so every persisted
record corresponds to a live lease at submission time.
"""

from __future__ import annotations

import threading
import time
from dataclasses import dataclass, field
from pathlib import Path
from typing import Optional

import numpy as np
from fastapi import FastAPI, HTTPException
from fastapi.staticfiles import StaticFiles
from pydantic import BaseModel

from .candidates import CANDIDATE_TAGS, CandidateSet
from .dataio import (DISCARD_REASONS, POSE_ERROR_REASONS, AnnotationRecord,
                     append_annotation, candidate_set_hash, read_annotations)
from .geometry import LabeledCloud
from .templates import CategoryTemplate

DEFAULT_LEASE_SECONDS = 120.0
PREVIEW_POINT_LIMIT = 4096


def decimate(cloud: LabeledCloud, limit: int = PREVIEW_POINT_LIMIT) -> LabeledCloud:
    """Even-stride subsample for client preview payloads."""
    n = len(cloud)
    if n <= limit:
        return cloud
    idx = np.linspace(0, n - 1, limit).astype(np.int64)
    return LabeledCloud(
        points=cloud.points[idx],
        colors=cloud.colors[idx] if cloud.colors is not None else None,
        labels=cloud.labels[idx] if cloud.labels is not None else None,
        part_names=cloud.part_names,
    )


@dataclass
class WorkItem:
    object_id: str
    candidate_set: CandidateSet
    object_preview: LabeledCloud
    template: CategoryTemplate


@dataclass
class AnnotationStore:
    """Work queue + lease table + log-backed completion state."""

    items: dict[str, WorkItem]
    order: list[str]
    log_path: Path
    lease_seconds: float = DEFAULT_LEASE_SECONDS
    _lock: threading.Lock = field(default_factory=threading.Lock, repr=False)

    def __post_init__(self):
        self.log_path = Path(self.log_path)
        self.leases: dict[str, tuple[str, float]] = {}
        records, _ = read_annotations(self.log_path)
        self.records = records
        self.completed = {r.object_id for r in records}
        self.duplicate_warnings = 0

    def _reclaim_expired(self, now: float) -> None:
        expired = [oid for oid, (_, exp) in self.leases.items() if exp <= now]
        for oid in expired:
            del self.leases[oid]

    def next_item(self, annotator_id: str) -> Optional[WorkItem]:
        """Lease the first unannotated, unleased object in manifest order."""
        now = time.monotonic()
        with self._lock:
            self._reclaim_expired(now)
            for oid in self.order:
                if oid in self.completed or oid in self.leases:
                    continue
                self.leases[oid] = (annotator_id, now + self.lease_seconds)
                return self.items[oid]
        return None

    def submit(self, annotator_id: str, object_id: str, decision: str,
               elapsed_ms: float, discard_reason: str | None = None) -> AnnotationRecord:
        now = time.monotonic()
        with self._lock:
            self._reclaim_expired(now)
            lease = self.leases.get(object_id)
            if lease is None or lease[0] != annotator_id:
                raise StaleLease(object_id)
            item = self.items[object_id]
            record = AnnotationRecord(
                object_id=object_id,
                decision=decision,
                discard_reason=discard_reason,
                annotator_id=annotator_id,
                elapsed_ms=elapsed_ms,
                candidate_set_hash=candidate_set_hash(item.candidate_set),
            )
            append_annotation(self.log_path, record)
            if object_id in self.completed:
                self.duplicate_warnings += 1
            self.records.append(record)
            self.completed.add(object_id)
            del self.leases[object_id]
            return record

    def stats(self) -> dict:
        with self._lock:
            records = list(self.records)
        total = len(records)
        selections = {tag: 0 for tag in CANDIDATE_TAGS}
        discards: dict[str, int] = {}
        per_annotator: dict[str, list[float]] = {}
        for r in records:
            per_annotator.setdefault(r.annotator_id, []).append(r.elapsed_ms)
            if r.decision == "discard":
                discards[r.discard_reason] = discards.get(r.discard_reason, 0) + 1
            else:
                selections[r.decision] += 1
        retained = sum(selections.values())
        pose_errors = sum(v for k, v in discards.items() if k in POSE_ERROR_REASONS)
        quality = sum(discards.values()) - pose_errors
        pct = (lambda x: 100.0 * x / total) if total else (lambda x: 0.0)
        return {
            "total_annotations": total,
            "retained_pct": pct(retained),
            "discarded_quality_pct": pct(quality),
            "discarded_pose_pct": pct(pose_errors),
            "selection_distribution": {t: pct(selections[t]) for t in CANDIDATE_TAGS},
            "discard_breakdown": dict(sorted(discards.items())),
            "annotator_mean_seconds": {
                a: float(np.mean(ms)) / 1000.0 for a, ms in sorted(per_annotator.items())
            },
            "remaining": len(self.order) - len(self.completed),
        }


class StaleLease(Exception):
    pass


# ------------------------------------------------------------- wire models


class NextResponse(BaseModel):
    status: str  # "ok" | "none-remaining"
    object_id: str | None = None
    lease_seconds: float | None = None
    retry_after_seconds: float | None = None


class CandidatePayload(BaseModel):
    tag: str
    quat_wxyz: list[float]
    diagnostics: dict


class CloudPayload(BaseModel):
    points: list[float]  # flat xyz triples
    colors: list[float] | None = None
    labels: list[int] | None = None
    part_names: list[str] | None = None


class ObjectPayload(BaseModel):
    object_id: str
    candidates: list[CandidatePayload]
    flags: list[str]
    candidate_set_hash: str
    object_cloud: CloudPayload
    template_cloud: CloudPayload
    template_category: str
    axis_convention: str


class SubmitRequest(BaseModel):
    annotator_id: str
    object_id: str
    decision: str
    discard_reason: str | None = None
    elapsed_ms: float


class SubmitResponse(BaseModel):
    status: str
    object_id: str


def _cloud_payload(cloud: LabeledCloud) -> CloudPayload:
    return CloudPayload(
        points=[float(v) for v in cloud.points.ravel()],
        colors=[float(v) for v in cloud.colors.ravel()] if cloud.colors is not None else None,
        labels=[int(v) for v in cloud.labels] if cloud.labels is not None else None,
        part_names=list(cloud.part_names) if cloud.part_names else None,
    )


def create_app(store: AnnotationStore, ui_dir: str | Path | None = None) -> FastAPI:
    app = FastAPI(title="cano annotation service")
    app.state.store = store

    @app.get("/healthz")
    def healthz():
        return {"status": "ok"}

    @app.get("/api/next", response_model=NextResponse)
    def api_next(annotator: str):
        item = store.next_item(annotator)
        if item is None:
            return NextResponse(status="none-remaining", retry_after_seconds=5.0)
        return NextResponse(status="ok", object_id=item.object_id,
                            lease_seconds=store.lease_seconds)

    @app.get("/api/object/{object_id}", response_model=ObjectPayload)
    def api_object(object_id: str):
        item = store.items.get(object_id)
        if item is None:
            raise HTTPException(status_code=404, detail=f"unknown object {object_id}")
        cs = item.candidate_set
        return ObjectPayload(
            object_id=object_id,
            candidates=[CandidatePayload(tag=c.tag,
                                         quat_wxyz=[float(v) for v in c.rotation.as_quat_wxyz()],
                                         diagnostics=_jsonable(c.diagnostics))
                        for c in cs.candidates],
            flags=list(cs.flags),
            candidate_set_hash=candidate_set_hash(cs),
            object_cloud=_cloud_payload(item.object_preview),
            template_cloud=_cloud_payload(decimate(item.template.cloud)),
            template_category=item.template.category,
            axis_convention=item.template.axis_convention,
        )

    @app.post("/api/submit", response_model=SubmitResponse)
    def api_submit(req: SubmitRequest):
        if req.decision != "discard" and req.decision not in CANDIDATE_TAGS:
            raise HTTPException(status_code=422, detail=f"invalid decision {req.decision!r}")
        if req.decision == "discard" and req.discard_reason not in DISCARD_REASONS:
            raise HTTPException(status_code=422,
                                detail=f"discard requires a reason from {DISCARD_REASONS}")
        try:
            store.submit(req.annotator_id, req.object_id, req.decision,
                         req.elapsed_ms, req.discard_reason)
        except StaleLease:
            raise HTTPException(status_code=409,
                                detail="stale-lease: lease expired or held by another annotator")
        except KeyError:
            raise HTTPException(status_code=404, detail=f"unknown object {req.object_id}")
        return SubmitResponse(status="ok", object_id=req.object_id)

    @app.get("/api/stats")
    def api_stats():
        return store.stats()

    if ui_dir is not None and Path(ui_dir).is_dir():
        app.mount("/", StaticFiles(directory=str(ui_dir), html=True), name="ui")

    return app


def _jsonable(d: dict) -> dict:
    out = {}
    for k, v in d.items():
        if isinstance(v, (np.floating, np.integer)):
            out[k] = v.item()
        elif isinstance(v, np.ndarray):
            out[k] = v.tolist()
        elif isinstance(v, list):
            out[k] = [x.item() if isinstance(x, (np.floating, np.integer)) else x for x in v]
        else:
            out[k] = v
    return out
