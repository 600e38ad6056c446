import numpy as np
import pytest
from fastapi.testclient import TestClient

from cellheal.service.app import app
from cellheal.statlearn import fit


@pytest.fixture(scope="module")
def client():
    with TestClient(app) as c:
        yield c


TINY = {
    "scenario": {"rings": 1},
    "sim": {"duration_s": 30, "warmup_s": 5, "matrix_duration_s": 40},
    "traffic": {"arrival_rate": 0.3},
}


def test_health(client):
    data = client.get("/health").json()
    assert data["status"] == "ok"


def test_default_config_document(client):
    data = client.get("/config/default").json()
    assert data["scenario"]["rings"] == 2
    assert data["healing"]["bcr_threshold_pct"] == 5.0
    assert data["seeds"]["root"] == 1


def test_simulate_endpoint(client):
    r = client.post("/simulate", json={"config": TINY, "seed": 3})
    assert r.status_code == 200
    data = r.json()
    assert len(data["rows"]) == 7
    assert data["rows"][0]["enb_id"] == 0
    assert data["rows"][0]["alpha"] == 0.5
    for row in data["rows"]:
        assert row["arrivals"] >= row["blocks"]


def test_simulate_alpha_override(client):
    r = client.post("/simulate", json={"config": TINY, "seed": 3, "alpha": 0.8})
    assert all(row["alpha"] == 0.8 for row in r.json()["rows"])


def test_simulate_writes_files(client, tmp_path):
    out = str(tmp_path / "run")
    r = client.post("/simulate", json={"config": TINY, "seed": 3, "out": out})
    files = r.json()["files"]
    assert set(files) == {"kpis", "matrix"}
    for path in files.values():
        assert open(path).readline()  # header exists


def test_simulate_deterministic_across_requests(client):
    a = client.post("/simulate", json={"config": TINY, "seed": 9}).json()
    b = client.post("/simulate", json={"config": TINY, "seed": 9}).json()
    assert a == b


def test_unknown_config_key_is_400_with_category(client):
    r = client.post("/simulate", json={"config": {"nope": 1}})
    assert r.status_code == 400
    body = r.json()
    assert body["category"] == "config-error"
    assert "nope" in body["message"]


def test_sweep_endpoint(client):
    r = client.post("/sweep", json={"config": TINY, "alpha_min": 0.25,
                                    "alpha_max": 1.0, "alpha_step": 0.25})
    data = r.json()
    assert [row["alpha"] for row in data["rows"]] == [0.25, 0.5, 0.75, 1.0]
    assert data["reference_alpha"] in [row["alpha"] for row in data["rows"]]


def test_matrix_endpoint(client):
    r = client.post("/matrix", json={"config": TINY, "duration": 30})
    data = r.json()
    assert data["ids"] == list(range(7))
    values = np.array(data["values_mw"])
    assert values.shape == (7, 7)
    assert np.all(values >= 0.0)
    assert np.all(np.diag(values) == 0.0)


def test_fit_endpoint_matches_library(client):
    xs = [0.1, 0.3, 0.5, 0.7, 0.9]
    ys = [26.35, 22.45, 17.55, 13.65, 11.52]
    r = client.post("/fit", json={"x": xs, "y": ys})
    data = r.json()
    model = fit(np.array(xs), np.array(ys))
    assert data["beta0"] == pytest.approx(model.beta0)
    assert data["beta1"] == pytest.approx(model.beta1)
    assert data["y_lo"] == pytest.approx(model.y_lo)
    assert data["n_samples"] == 5


def test_fit_endpoint_rejects_degenerate(client):
    r = client.post("/fit", json={"x": [0.5, 0.5, 0.5], "y": [1.0, 2.0, 3.0]})
    assert r.status_code == 400
    assert r.json()["category"] == "fit-error"


def test_oracle_heal_endpoint(client, tmp_path):
    out = str(tmp_path / "oracle")
    r = client.post("/oracle-heal", json={"seed": 11, "out": out})
    assert r.status_code == 200
    data = r.json()
    assert abs(data["converged_alpha"] - data["true_alpha"]) <= 0.05
    assert data["iterations"] == len(data["trace"])
    assert "trace" in data["files"]
    phases = [t["phase"] for t in data["trace"]]
    assert phases[:5] == ["init"] * 5


def test_heal_endpoint_tiny_simulation(client, tmp_path):
    # minimal but complete healing run over the simulator
    cfg = {
        "scenario": {"rings": 1},
        "sim": {"duration_s": 60, "warmup_s": 10, "matrix_duration_s": 60},
        "traffic": {"arrival_rate": 0.55},
        "healing": {"faulty_enb": 0, "init_alphas": [0.9, 0.5, 0.1],
                    "max_iterations": 2},
    }
    out = str(tmp_path / "heal")
    r = client.post("/heal", json={"config": cfg, "seed": 2, "out": out})
    assert r.status_code == 200
    data = r.json()
    assert data["faulty_enb"] == 0
    assert sorted(data["tier1"]) == [1, 2, 3, 4, 5, 6]
    assert data["iterations"] == 3 + len([t for t in data["trace"]
                                          if t["phase"] == "optimize"])
    expected = {"reference_kpis", "optimized_kpis", "matrix", "trace", "report",
                "scatter", "curves", "zone_bars", "ordered"}
    assert expected <= set(data["files"])
    assert len(data["zone_rows"]) == 7  # rings=1: no second tier
