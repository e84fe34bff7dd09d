import json

import pytest
from fastapi.testclient import TestClient

from genref.annotation import AnnotationProject, create_app
from genref.data import load_dataset
from genref.synth import SceneConfig, generate_synthetic

FORBIDDEN_KEYS = {"annotator_selection", "annotator_id"}


def walk_keys(obj):
    if isinstance(obj, dict):
        for k, v in obj.items():
            yield k
            yield from walk_keys(v)
    elif isinstance(obj, list):
        for v in obj:
            yield from walk_keys(v)


@pytest.fixture()
def client(tmp_path):
    ds = generate_synthetic(SceneConfig(n_single=3, n_multi=2, n_no_target=1), seed=33)
    ds.save(tmp_path / "data")
    project = AnnotationProject.initialize(tmp_path / "proj", tmp_path / "data", seed=1)
    app = create_app(project)
    return TestClient(app), project, tmp_path


class TestEndpoints:
    def test_full_round_trip(self, client):
        http, project, tmp = client
        images = sorted(project.image_sizes)[:2]
        r = http.post("/api/v1/create-tasks", json={"image_ids": images})
        assert r.status_code == 200
        tasks = r.json()["tasks"]
        assert len(tasks) == 2

        r = http.get("/api/v1/annotation-task", params={"annotator_id": "alice"})
        task = r.json()["task"]
        assert task["state"] == "PENDING_ANNOTATION"
        selection = [task["candidate_instances"][0]["ann_id"]]
        r = http.post(
            "/api/v1/submit-annotation",
            json={"task_id": task["task_id"], "annotator_id": "alice",
                  "selection": selection, "expression": "the first thing"},
        )
        assert r.json()["state"] == "PENDING_VALIDATION"

        r = http.get("/api/v1/next-validation", params={"validator_id": "bob"})
        blind = r.json()["task"]
        assert blind["task_id"] == task["task_id"]
        r = http.post(
            "/api/v1/submit-validation",
            json={"task_id": blind["task_id"], "validator_id": "bob",
                  "selection": selection},
        )
        assert r.json()["state"] == "VALID"

        r = http.post("/api/v1/export", json={})
        export_dir = r.json()["export_dir"]
        samples = load_dataset(export_dir, "train")
        assert len(samples) == 1
        assert samples[0].expression == "the first thing"

    def test_validation_payloads_never_leak_selection(self, client):
        http, project, _ = client
        images = sorted(project.image_sizes)[:3]
        http.post("/api/v1/create-tasks", json={"image_ids": images})
        for i, img in enumerate(images):
            r = http.get("/api/v1/annotation-task", params={"annotator_id": "alice"})
            task = r.json()["task"]
            sel = [task["candidate_instances"][0]["ann_id"]] if i % 2 else []
            http.post(
                "/api/v1/submit-annotation",
                json={"task_id": task["task_id"], "annotator_id": "alice",
                      "selection": sel, "expression": f"expr {i}"},
            )
        while True:
            r = http.get("/api/v1/next-validation", params={"validator_id": "bob"})
            payload = r.json()
            assert FORBIDDEN_KEYS.isdisjoint(set(walk_keys(payload)))
            task = payload["task"]
            if task is None:
                break
            http.post(
                "/api/v1/submit-validation",
                json={"task_id": task["task_id"], "validator_id": "bob", "selection": []},
            )

    def test_suggest_no_target(self, client):
        http, project, _ = client
        images = sorted(project.image_sizes)[:3]
        http.post("/api/v1/create-tasks", json={"image_ids": images})
        for i in range(3):
            r = http.get("/api/v1/annotation-task", params={"annotator_id": "a"})
            t = r.json()["task"]
            http.post("/api/v1/submit-annotation",
                      json={"task_id": t["task_id"], "annotator_id": "a",
                            "selection": [], "expression": f"filler {i}"})
        r = http.post("/api/v1/create-tasks", json={"image_ids": [images[0]]})
        probe = r.json()["tasks"][0]["task_id"]
        r = http.get("/api/v1/suggest-no-target", params={"task_id": probe, "k": 2})
        assert r.status_code == 200
        suggestions = r.json()["suggestions"]
        assert len(suggestions) == 2
        assert all(s["source_image_id"] != images[0] for s in suggestions)

    def test_error_mapping(self, client):
        http, project, _ = client
        r = http.post("/api/v1/submit-validation",
                      json={"task_id": 999, "validator_id": "v", "selection": []})
        assert r.status_code == 404
        images = sorted(project.image_sizes)[:1]
        http.post("/api/v1/create-tasks", json={"image_ids": images})
        r = http.get("/api/v1/annotation-task", params={"annotator_id": "a"})
        tid = r.json()["task"]["task_id"]
        r = http.post("/api/v1/submit-validation",
                      json={"task_id": tid, "validator_id": "v", "selection": []})
        assert r.status_code == 409
        r = http.post("/api/v1/submit-annotation",
                      json={"task_id": tid, "annotator_id": "a",
                            "selection": [], "expression": ""})
        assert r.status_code == 400

    def test_images_served(self, client):
        http, project, _ = client
        img = sorted(project.image_sizes)[0]
        r = http.get(f"/images/{img}.png")
        assert r.status_code == 200
        assert r.headers["content-type"] == "image/png"
        assert http.get("/images/31337.png").status_code == 404

    def test_headless_index(self, client):
        http, _, _ = client
        r = http.get("/")
        assert r.status_code == 200
        assert "annotation service" in r.text
