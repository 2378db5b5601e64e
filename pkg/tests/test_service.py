import threading
import time

import numpy as np
import pytest
from fastapi.testclient import TestClient

from cano.candidates import CANDIDATE_TAGS, Candidate, CandidateSet
from cano.dataio import AnnotationRecord, append_annotation, candidate_set_hash
from cano.geometry import LabeledCloud, Rotation
from cano.service import (AnnotationStore, StaleLease, WorkItem, create_app,
                          decimate)
from cano.templates import CategoryTemplate


def make_candidate_set(object_id: str, seed: int = 0) -> CandidateSet:
    rng = np.random.default_rng(seed)
    cands = tuple(Candidate(tag, Rotation.random(rng), {"score": float(i)})
                  for i, tag in enumerate(CANDIDATE_TAGS))
    return CandidateSet(object_id=object_id, candidates=cands, flags=())


def make_store(tmp_path, n_objects=3, lease_seconds=120.0, log_name="log.jsonl"):
    rng = np.random.default_rng(99)
    template = CategoryTemplate(
        category="widget",
        cloud=LabeledCloud(rng.normal(size=(40, 3)),
                           labels=rng.integers(0, 2, 40), part_names=("a", "b")),
        axis_convention="z front, y up")
    items, order = {}, []
    for i in range(n_objects):
        oid = f"o{i}"
        cloud = LabeledCloud(rng.normal(size=(30, 3)))
        items[oid] = WorkItem(object_id=oid, candidate_set=make_candidate_set(oid, i),
                              object_preview=cloud, template=template)
        order.append(oid)
    return AnnotationStore(items=items, order=order,
                           log_path=tmp_path / log_name, lease_seconds=lease_seconds)


class TestDecimate:
    def test_under_limit_unchanged(self):
        cloud = LabeledCloud(np.random.default_rng(0).normal(size=(100, 3)))
        assert decimate(cloud, limit=200) is cloud

    def test_over_limit_subsampled(self):
        rng = np.random.default_rng(1)
        cloud = LabeledCloud(rng.normal(size=(10000, 3)),
                             labels=rng.integers(0, 3, 10000),
                             part_names=("a", "b", "c"))
        out = decimate(cloud, limit=4096)
        assert len(out) == 4096
        assert out.part_names == cloud.part_names
        assert np.array_equal(out.points[0], cloud.points[0])
        assert np.array_equal(out.points[-1], cloud.points[-1])


class TestLeasing:
    def test_exclusive_issuance(self, tmp_path):
        store = make_store(tmp_path, n_objects=3)
        a = store.next_item("alice").object_id
        b = store.next_item("bob").object_id
        c = store.next_item("alice").object_id
        assert len({a, b, c}) == 3
        assert store.next_item("bob") is None

    def test_expired_lease_reissued(self, tmp_path):
        store = make_store(tmp_path, n_objects=1, lease_seconds=0.05)
        first = store.next_item("alice")
        assert store.next_item("bob") is None
        time.sleep(0.1)
        again = store.next_item("bob")
        assert again is not None and again.object_id == first.object_id

    def test_submit_requires_live_lease(self, tmp_path):
        store = make_store(tmp_path, n_objects=2)
        with pytest.raises(StaleLease):
            store.submit("alice", "o0", "HS", 100.0)
        item = store.next_item("alice")
        with pytest.raises(StaleLease):
            store.submit("bob", item.object_id, "HS", 100.0)

    def test_submit_after_expiry_writes_nothing(self, tmp_path):
        store = make_store(tmp_path, n_objects=1, lease_seconds=0.05)
        item = store.next_item("alice")
        time.sleep(0.1)
        with pytest.raises(StaleLease):
            store.submit("alice", item.object_id, "HS", 100.0)
        assert not store.log_path.exists() or store.log_path.read_text() == ""

    def test_submit_releases_and_completes(self, tmp_path):
        store = make_store(tmp_path, n_objects=1)
        item = store.next_item("alice")
        rec = store.submit("alice", item.object_id, "HG", 1234.0)
        assert rec.candidate_set_hash == candidate_set_hash(item.candidate_set)
        assert store.next_item("alice") is None  # completed, not re-dispatched
        assert store.log_path.read_text().count("\n") == 1

    def test_concurrent_clients_no_duplicate_leases(self, tmp_path):
        n = 60
        store = make_store(tmp_path, n_objects=n)
        issued: list[str] = []
        lock = threading.Lock()

        def worker(wid):
            while True:
                item = store.next_item(f"ann{wid}")
                if item is None:
                    return
                with lock:
                    issued.append(item.object_id)
                store.submit(f"ann{wid}", item.object_id, "HS", 1.0)

        threads = [threading.Thread(target=worker, args=(w,)) for w in range(8)]
        for t in threads:
            t.start()
        for t in threads:
            t.join()
        assert sorted(issued) == sorted(f"o{i}" for i in range(n))
        assert len(store.records) == n


class TestHttpApi:
    @pytest.fixture()
    def client(self, tmp_path):
        store = make_store(tmp_path, n_objects=3)
        return TestClient(create_app(store)), store

    def test_healthz(self, client):
        c, _ = client
        assert c.get("/healthz").json() == {"status": "ok"}

    def test_next_and_object_payload(self, client):
        c, store = client
        r = c.get("/api/next", params={"annotator": "alice"}).json()
        assert r["status"] == "ok"
        oid = r["object_id"]
        assert r["lease_seconds"] == store.lease_seconds
        obj = c.get(f"/api/object/{oid}").json()
        assert [cand["tag"] for cand in obj["candidates"]] == list(CANDIDATE_TAGS)
        assert obj["candidate_set_hash"] == candidate_set_hash(
            store.items[oid].candidate_set)
        assert len(obj["object_cloud"]["points"]) == 3 * 30
        assert obj["template_cloud"]["part_names"] == ["a", "b"]
        assert obj["template_category"] == "widget"

    def test_unknown_object_404(self, client):
        c, _ = client
        assert c.get("/api/object/nope").status_code == 404

    def test_submit_flow(self, client):
        c, _ = client
        oid = c.get("/api/next", params={"annotator": "alice"}).json()["object_id"]
        r = c.post("/api/submit", json={
            "annotator_id": "alice", "object_id": oid, "decision": "HS",
            "elapsed_ms": 2600.0})
        assert r.status_code == 200
        stats = c.get("/api/stats").json()
        assert stats["total_annotations"] == 1
        assert stats["remaining"] == 2
        assert stats["annotator_mean_seconds"]["alice"] == pytest.approx(2.6)

    def test_invalid_decision_422(self, client):
        c, _ = client
        oid = c.get("/api/next", params={"annotator": "a"}).json()["object_id"]
        r = c.post("/api/submit", json={
            "annotator_id": "a", "object_id": oid, "decision": "BEST",
            "elapsed_ms": 1.0})
        assert r.status_code == 422
        r = c.post("/api/submit", json={
            "annotator_id": "a", "object_id": oid, "decision": "discard",
            "elapsed_ms": 1.0})
        assert r.status_code == 422  # discard without reason

    def test_stale_lease_409(self, tmp_path):
        store = make_store(tmp_path, n_objects=1, lease_seconds=0.05)
        c = TestClient(create_app(store))
        oid = c.get("/api/next", params={"annotator": "a"}).json()["object_id"]
        time.sleep(0.1)
        r = c.post("/api/submit", json={
            "annotator_id": "a", "object_id": oid, "decision": "HS",
            "elapsed_ms": 1.0})
        assert r.status_code == 409

    def test_none_remaining(self, client):
        c, _ = client
        for _ in range(3):
            oid = c.get("/api/next", params={"annotator": "a"}).json()["object_id"]
            c.post("/api/submit", json={"annotator_id": "a", "object_id": oid,
                                        "decision": "HG", "elapsed_ms": 1.0})
        r = c.get("/api/next", params={"annotator": "a"}).json()
        assert r["status"] == "none-remaining"
        assert r["retry_after_seconds"] == 5.0


class TestStats:
    def test_empty_log(self, tmp_path):
        store = make_store(tmp_path)
        stats = store.stats()
        assert stats["total_annotations"] == 0
        assert stats["retained_pct"] == 0.0
        assert stats["remaining"] == 3

    def test_counting_fixture(self, tmp_path):
        store = make_store(tmp_path, n_objects=4)
        decisions = [("HS", None), ("HS", None), ("HG", None),
                     ("discard", "quality-meaningless")]
        for decision, reason in decisions:
            item = store.next_item("a")
            store.submit("a", item.object_id, decision, 1.0, reason)
        stats = store.stats()
        assert stats["selection_distribution"]["HS"] == 50.0
        assert stats["selection_distribution"]["HG"] == 25.0
        assert stats["retained_pct"] == 75.0
        assert stats["discarded_quality_pct"] == 25.0

    def test_screening_proportions_fixture(self, tmp_path):
        # 100-object log: 51 quality discards, 6 pose-error discards, 43 selects
        log = tmp_path / "log.jsonl"
        quality = ["quality-thin-shell"] * 30 + ["quality-meaningless"] * 15 + \
                  ["quality-incomplete"] * 6
        for i, reason in enumerate(quality):
            append_annotation(log, AnnotationRecord(
                f"q{i}", "discard", "a", 1.0, "h", discard_reason=reason))
        for i in range(6):
            append_annotation(log, AnnotationRecord(
                f"p{i}", "discard", "a", 1.0, "h",
                discard_reason="pose-error-none-correct"))
        for i in range(43):
            append_annotation(log, AnnotationRecord(
                f"s{i}", CANDIDATE_TAGS[i % 5], "a", 1.0, "h"))
        order = [f"q{i}" for i in range(51)] + [f"p{i}" for i in range(6)] + \
                [f"s{i}" for i in range(43)]
        store = AnnotationStore(items={}, order=order, log_path=log)
        stats = store.stats()
        assert abs(stats["discarded_quality_pct"] - 51.0) <= 0.5
        assert abs(stats["discarded_pose_pct"] - 6.0) <= 0.5
        assert abs(stats["retained_pct"] - 43.0) <= 0.5
        assert stats["remaining"] == 0


class TestRestart:
    def test_log_is_source_of_truth(self, tmp_path):
        store = make_store(tmp_path, n_objects=3)
        for _ in range(2):
            item = store.next_item("a")
            store.submit("a", item.object_id, "HS", 1.0)
        # simulate a crash: rebuild the store from the same log
        reborn = make_store(tmp_path, n_objects=3)
        assert reborn.completed == store.completed
        assert len(reborn.records) == 2
        remaining = reborn.next_item("b")
        assert remaining is not None
        assert remaining.object_id not in reborn.completed
        assert reborn.next_item("b") is None  # only one was left

    def test_leases_are_ephemeral(self, tmp_path):
        store = make_store(tmp_path, n_objects=1)
        store.next_item("a")  # leased, never submitted
        reborn = make_store(tmp_path, n_objects=1)
        assert reborn.next_item("b") is not None  # lease did not survive
