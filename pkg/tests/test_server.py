import numpy as np
import pytest
from fastapi.testclient import TestClient

from nsb.cnn import TumorClass
from nsb.dsis import RatingStore, Stimulus
from nsb.dsis.server import create_app
from nsb.imagecore import GrayImage, write_image

SESSION_VISIBLE_KEYS = {
    "done", "stimulus_id", "reference_url", "processed_url", "rated", "total",
    "session_id", "scale", "percent", "timestamp", "error", "message",
}


@pytest.fixture
def client(tmp_path):
    stim_dir = tmp_path / "stimuli"
    stim_dir.mkdir()
    pool = []
    k = 0
    for cls in TumorClass:
        for i in range(13):
            sid = f"stim{k:04d}"
            ref, proc = f"{sid}_ref.pgm", f"{sid}_proc.pgm"
            img = GrayImage(np.full((4, 4), 60 + k, dtype=np.uint8))
            write_image(img, stim_dir / ref)
            write_image(img, stim_dir / proc)
            pool.append(Stimulus(sid, ref, proc, cls, is_decoy=i == 0))
            k += 1
    store = RatingStore(tmp_path / "store")
    app = create_app(store, pool, stim_dir)
    return TestClient(app)


def walk_json(node):
    if isinstance(node, dict):
        for key, value in node.items():
            yield key
            yield from walk_json(value)
    elif isinstance(node, list):
        for item in node:
            yield from walk_json(item)


def test_full_session_lifecycle(client):
    created = client.post("/sessions", json={"cohort": "neurologist", "seed": 11})
    assert created.status_code == 201
    session_id = created.json()["session_id"]
    assert created.json()["total"] == 24

    seen = []
    for step in range(24):
        nxt = client.get(f"/sessions/{session_id}/next").json()
        assert nxt["done"] is False
        assert nxt["rated"] == step
        assert nxt["total"] == 24
        seen.append(nxt["stimulus_id"])
        posted = client.post(
            f"/sessions/{session_id}/ratings",
            json={"stimulus_id": nxt["stimulus_id"], "scale": 4, "percent": 75},
        )
        assert posted.status_code == 201
    assert len(set(seen)) == 24
    done = client.get(f"/sessions/{session_id}/next").json()
    assert done == {"done": True, "rated": 24, "total": 24}


def test_session_responses_never_leak_class_or_decoy(client):
    created = client.post("/sessions", json={"cohort": "medical_officer", "seed": 2})
    session_id = created.json()["session_id"]
    responses = [created.json()]
    nxt = client.get(f"/sessions/{session_id}/next").json()
    responses.append(nxt)
    responses.append(
        client.post(
            f"/sessions/{session_id}/ratings",
            json={"stimulus_id": nxt["stimulus_id"], "scale": 1, "percent": 0},
        ).json()
    )
    for resp in responses:
        keys = set(walk_json(resp))
        assert keys <= SESSION_VISIBLE_KEYS
        blob = str(resp).lower()
        assert "decoy" not in blob
        assert "glioma" not in blob  # covers meningioma's substring too


def test_rating_error_mapping(client):
    session_id = client.post(
        "/sessions", json={"cohort": "intern_house_officer", "seed": 5}
    ).json()["session_id"]
    nxt = client.get(f"/sessions/{session_id}/next").json()

    unknown = client.post(
        f"/sessions/{session_id}/ratings",
        json={"stimulus_id": "stim9999", "scale": 3, "percent": 50},
    )
    assert unknown.status_code == 404
    assert unknown.json()["error"] == "unknown_stimulus"

    for scale, percent in [(0, 50), (6, 50), (3, -1), (3, 101)]:
        bad = client.post(
            f"/sessions/{session_id}/ratings",
            json={"stimulus_id": nxt["stimulus_id"], "scale": scale, "percent": percent},
        )
        assert bad.status_code == 400
        assert bad.json()["error"] == "range"

    ok = client.post(
        f"/sessions/{session_id}/ratings",
        json={"stimulus_id": nxt["stimulus_id"], "scale": 3, "percent": 50},
    )
    assert ok.status_code == 201
    dup = client.post(
        f"/sessions/{session_id}/ratings",
        json={"stimulus_id": nxt["stimulus_id"], "scale": 3, "percent": 50},
    )
    assert dup.status_code == 409
    assert dup.json()["error"] == "duplicate"


def test_unknown_session_404(client):
    assert client.get("/sessions/s9999/next").status_code == 404


def test_summary_and_export(client):
    session_id = client.post(
        "/sessions", json={"cohort": "neurologist", "seed": 7}
    ).json()["session_id"]
    for _ in range(3):
        nxt = client.get(f"/sessions/{session_id}/next").json()
        client.post(
            f"/sessions/{session_id}/ratings",
            json={"stimulus_id": nxt["stimulus_id"], "scale": 5, "percent": 90},
        )
    summary = client.get("/results/summary").json()
    assert summary["total_ratings"] == 3
    assert all(g["mos"] == 5.0 for g in summary["groups"])
    export = client.get("/results/export")
    assert export.headers["content-type"].startswith("text/csv")
    lines = export.text.splitlines()
    assert lines[0] == "session_id,stimulus_id,scale,percent,timestamp"
    assert len(lines) == 4


def test_static_stimulus_serving(client):
    session_id = client.post(
        "/sessions", json={"cohort": "neurologist", "seed": 1}
    ).json()["session_id"]
    nxt = client.get(f"/sessions/{session_id}/next").json()
    img = client.get(nxt["reference_url"])
    assert img.status_code == 200
    assert img.headers["content-type"] == "image/x-portable-graymap"
    assert img.content.startswith(b"P5\n4 4\n255\n")


def test_static_path_traversal_blocked(client):
    assert client.get("/stimuli/%2e%2e%2fsecrets.txt").status_code == 404


def test_instructions_lists_five_levels(client):
    body = client.get("/instructions").json()
    assert [lvl["value"] for lvl in body["scale"]] == [5, 4, 3, 2, 1]
    assert body["total_stimuli"] == 24
