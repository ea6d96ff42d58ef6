from pathlib import Path

import pytest

from tirp_forge.data_model import load_kb

REPO_ROOT = Path(__file__).resolve().parents[1]
KB_PATH = REPO_ROOT / "kb" / "sepsis26.json"
DATA_DIR = Path(__file__).resolve().parent / "data"


@pytest.fixture(scope="session")
def kb():
    return load_kb(KB_PATH)


@pytest.fixture(scope="session")
def kb_path():
    return KB_PATH


@pytest.fixture(scope="session")
def data_dir():
    return DATA_DIR
