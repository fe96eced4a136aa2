import importlib.util
from pathlib import Path

from conftest import DATA

TOOL = Path(__file__).resolve().parents[1] / "tools" / "generate_data.py"


def load_tool():
    spec = importlib.util.spec_from_file_location("generate_data", TOOL)
    module = importlib.util.module_from_spec(spec)
    spec.loader.exec_module(module)
    return module


def test_shipped_data_matches_generator(tmp_path):
    written = load_tool().generate(tmp_path)
    assert written
    for path in written:
        rel = Path(path).relative_to(tmp_path)
        assert (DATA / rel).read_bytes() == Path(path).read_bytes(), rel
