import inspect

import pytest
from fastapi.testclient import TestClient
from sqlalchemy import create_engine
from sqlalchemy.orm import sessionmaker

from app.core.config.database import Base, get_db
from app.core.config.env import get_settings
from app.service.mapping_service import MappingService
from app.service.peersim_service import PeersimService


@pytest.fixture
def client(settings, tmp_path, monkeypatch):
    monkeypatch.chdir(tmp_path)
    from app.main import app

    engine = create_engine(settings.DATABASE_URL, connect_args={"check_same_thread": False})
    Base.metadata.create_all(bind=engine)
    TestingSession = sessionmaker(autocommit=False, autoflush=False, bind=engine)

    def override_get_db():
        db = TestingSession()
        try:
            yield db
        finally:
            db.close()

    app.dependency_overrides[get_db] = override_get_db
    app.dependency_overrides[get_settings] = lambda: settings
    with TestClient(app) as c:
        yield c
    app.dependency_overrides.clear()
    engine.dispose()


@pytest.fixture
def device(settings, snapstore, document_corpus, tmp_path):
    mapping = MappingService(settings)
    peersim = PeersimService(snapstore, mapping, settings)
    peersim.init_device(16384)
    layout, _ = peersim.write_corpus(document_corpus)
    layout_path = tmp_path / "layout.json"
    mapping.save_layout(layout, layout_path)
    return layout_path


def test_health_reports_store_state(client, settings):
    response = client.get("/health")
    assert response.status_code == 200
    body = response.json()
    assert body["store_dir"] == settings.STORE_DIR
    assert body["latest_epoch"] is None


def test_simulate_detect_and_browse_reports(client, device, document_corpus, tmp_path):
    assert client.get("/health").json()["latest_epoch"] == 1

    manifest_path = tmp_path / "manifest.json"
    response = client.post("/manifests/build", json={"corpus_dir": str(document_corpus),
                                                     "out_path": str(manifest_path)})
    assert response.status_code == 201
    assert response.json()["data"]["components"] > 0
    assert manifest_path.is_file()

    targets = ["txt/txt_000.txt", "pdf/pdf_000.pdf"]
    result_path = tmp_path / "campaign.json"
    response = client.post("/simulations/", json={"pattern": "fast:4096", "layout_path": str(device),
                                                  "result_path": str(result_path), "targets": targets})
    assert response.status_code == 201
    assert response.json()["data"]["epoch"] == 2
    assert response.json()["data"]["positive_files"] == 2

    response = client.post("/detections/", json={
        "e_i": 2, "e_j": 2, "layout_path": str(device), "manifest_path": str(manifest_path),
        "ground_truth_path": str(result_path), "save": True,
    })
    assert response.status_code == 201
    body = response.json()
    run_id = body["run_id"]
    assert run_id
    assert body["data"]["file_level"]["fn"] == 0
    assert sorted(v["path"] for v in body["data"]["verdicts"] if v["decision"] == "Suspicious") == \
        sorted(f"{t}.enc" for t in targets)

    listing = client.get("/reports/", params={"limit": 10}).json()
    assert listing["pagination"]["count"] == 1
    assert listing["data"][0]["id"] == run_id
    assert listing["data"][0]["file_level"]["recall"] == 1.0

    detail = client.get(f"/reports/{run_id}").json()
    assert detail["data"]["e_j"] == 2
    assert client.get("/reports/not-a-run").status_code == 404


def test_stage_failure_is_reported(client, device):
    response = client.post("/detections/", json={"e_i": 4, "e_j": 4, "layout_path": str(device)})
    assert response.status_code >= 400
    assert response.json()["detail"]["stage"] == "delta"


def test_request_validation(client, device):
    response = client.post("/detections/", json={"e_i": 0, "e_j": 1, "layout_path": str(device)})
    assert response.status_code == 422
    response = client.post("/simulations/", json={"pattern": "rot13", "layout_path": str(device)})
    assert response.status_code == 422


def test_pipeline_routes_run_in_the_threadpool(client):
    heavy = {"/detections/", "/simulations/", "/manifests/build"}
    routes = {r.path: r.endpoint for r in client.app.routes if getattr(r, "path", None) in heavy}
    assert set(routes) == heavy
    assert not any(inspect.iscoroutinefunction(endpoint) for endpoint in routes.values())
