import uuid

import pytest
from fastapi.testclient import TestClient

from app.web.main import create_app

DESIGN = {
    "alpha_S": [10, 9, 11, 30],
    "n_min": 10,
    "n_max": 30,
    "lambda": 0.8,
    "theta_L": 0.001,
}


@pytest.fixture(scope="module")
def client():
    with TestClient(create_app()) as c:
        yield c


def test_health(client):
    assert client.get("/monitor/health").json() == {"status": "ok"}


def test_index(client):
    body = client.post("/monitor/index", json={"p": [0.15, 0.30, 0.15, 0.40]}).json()
    assert body["status"] == "ok"
    assert 0.0 < body["phi_eff"] < 1.0
    assert set(body["cov"]) == {"s11", "s12", "s22"}

    body = client.post("/monitor/index", json={"p": [0.0, 1.0, 0.0, 0.0]}).json()
    assert body["phi_eff"] == pytest.approx(1.0, abs=1e-12)
    assert body["cov"] is None


def test_index_rejects_bad_table(client):
    resp = client.post("/monitor/index", json={"p": [0.5, 0.5, 0.5, 0.5]})
    assert resp.status_code == 422
    assert resp.json()["reason"] == "invalid_table"


def test_pp(client):
    body = client.post("/monitor/pp", json={"design": DESIGN, "x": [5, 10, 0, 10], "detail": True}).json()
    assert body["status"] == "ok"
    assert body["pp"] == pytest.approx(0.907, abs=1e-3)
    assert body["decision"] == "continue"
    assert len(body["rows"]) == 56

    body = client.post("/monitor/pp", json={"design": DESIGN, "x": [0, 10, 5, 10]}).json()
    assert body["pp"] == pytest.approx(0.732, abs=2e-3)
    assert "rows" not in body


def test_pp_errors(client):
    bad_design = {**DESIGN, "lambda": 1.5}
    resp = client.post("/monitor/pp", json={"design": bad_design, "x": [5, 10, 0, 10]})
    assert resp.status_code == 422
    assert resp.json()["reason"] == "config_error"

    resp = client.post("/monitor/pp", json={"design": DESIGN, "x": [5, 13, 2, 11]})
    assert resp.status_code == 422
    assert resp.json()["reason"] == "trial_complete"


def test_looks_are_stored_in_order(client):
    code = f"trial-{uuid.uuid4().hex[:8]}"
    second = client.post(
        f"/monitor/trials/{code}/looks",
        json={"design": DESIGN, "x": [0, 10, 5, 10], "note": "second look"},
    ).json()
    first = client.post(f"/monitor/trials/{code}/looks", json={"design": DESIGN, "x": [2, 5, 0, 3]}).json()
    assert second["status"] == "ok"
    assert second["n"] == 25
    assert first["n"] == 10

    body = client.get(f"/monitor/trials/{code}/looks").json()
    assert body["trial_code"] == code
    assert [look["n"] for look in body["looks"]] == [10, 25]
    assert body["looks"][1]["x"] == [0, 10, 5, 10]
    assert body["looks"][1]["note"] == "second look"
    assert body["looks"][1]["pp"] == pytest.approx(0.732, abs=2e-3)
    assert body["looks"][1]["method"] == "asymptotic"


def test_unknown_trial_has_no_looks(client):
    body = client.get("/monitor/trials/never-seen/looks").json()
    assert body == {"status": "ok", "trial_code": "never-seen", "looks": []}


def test_pp_at_maximum_is_final_analysis(client):
    body = client.post("/monitor/pp", json={"design": DESIGN, "x": [10, 10, 0, 10]}).json()
    assert body["status"] == "ok"
    assert body["final"] is True
    assert body["claim"] == "claim_not_effective"
    assert 0.0 <= body["b"] < 0.8
    assert "decision" not in body

    body = client.post("/monitor/pp", json={"design": DESIGN, "x": [5, 13, 2, 10]}).json()
    assert body["claim"] == "claim_effective"
    assert body["b"] == pytest.approx(0.8378, abs=1e-3)

    body = client.post("/monitor/pp", json={"design": DESIGN, "x": [5, 10, 0, 10]}).json()
    assert body["final"] is False


def test_look_at_maximum_is_rejected(client):
    code = f"trial-{uuid.uuid4().hex[:8]}"
    resp = client.post(f"/monitor/trials/{code}/looks", json={"design": DESIGN, "x": [10, 10, 0, 10]})
    assert resp.status_code == 422
    assert resp.json()["reason"] == "wrong_sample_size"
    assert client.get(f"/monitor/trials/{code}/looks").json()["looks"] == []
