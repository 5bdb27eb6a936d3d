import pytest

from helpers import ScriptedRepo, build_tracking_repo


@pytest.fixture(scope="session")
def tracking_repo(tmp_path_factory):
    return build_tracking_repo(tmp_path_factory.mktemp("tracking") / "repo")


@pytest.fixture
def scripted(tmp_path):
    return ScriptedRepo(tmp_path / "repo")
