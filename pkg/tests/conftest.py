import numpy as np
import pytest

from app.core.config.env import Settings
from app.service.manifest_service import build_manifest
from app.service.snapstore_service import SnapstoreService
from app.utils.corpus import DOCUMENT_FORMATS, build_corpus


def pytest_addoption(parser):
    parser.addoption("--runslow", action="store_true", default=False,
                     help="run acceptance tests over full-size synthetic corpora")


def pytest_configure(config):
    config.addinivalue_line("markers", "slow: acceptance runs over full-size synthetic corpora")


def pytest_collection_modifyitems(config, items):
    if config.getoption("--runslow"):
        return
    skip_slow = pytest.mark.skip(reason="needs --runslow")
    for item in items:
        if "slow" in item.keywords:
            item.add_marker(skip_slow)


@pytest.fixture
def settings(tmp_path) -> Settings:
    return Settings(
        _env_file=None,
        STORE_DIR=str(tmp_path / "store"),
        DATABASE_URL=f"sqlite:///{tmp_path / 'favscan.db'}",
        SENTRY_DSN="",
        LOG_LEVEL="WARNING",
    )


@pytest.fixture
def snapstore(settings) -> SnapstoreService:
    return SnapstoreService(settings=settings)


@pytest.fixture
def rng() -> np.random.Generator:
    return np.random.default_rng(20240102)


@pytest.fixture(scope="session")
def document_corpus(tmp_path_factory):
    """Three files of every document format."""
    root = tmp_path_factory.mktemp("documents")
    build_corpus(root, {fmt: 3 for fmt in DOCUMENT_FORMATS}, seed=11)
    return root


@pytest.fixture(scope="session")
def mixed_corpus_dir(tmp_path_factory):
    """Two files of every document and media format."""
    from app.utils.corpus import MIXED_FORMATS

    root = tmp_path_factory.mktemp("mixed")
    build_corpus(root, {fmt: 2 for fmt in MIXED_FORMATS}, seed=5)
    return root


@pytest.fixture(scope="session")
def mixed_manifest(mixed_corpus_dir):
    return build_manifest(mixed_corpus_dir, {"jpg", "jpeg", "png", "mp3", "mp4"})
