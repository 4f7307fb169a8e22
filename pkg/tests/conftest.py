import sys
from pathlib import Path

import numpy as np
import pytest

sys.path.insert(0, str(Path(__file__).parent))

from tex3d import shapes  # noqa: E402


@pytest.fixture
def rng():
    return np.random.default_rng(1234)


@pytest.fixture
def write_obj(tmp_path):
    def _write(text, name="mesh.obj"):
        p = tmp_path / name
        p.write_text(text)
        return p

    return _write


@pytest.fixture(scope="session")
def ico2():
    return shapes.icosphere(2)


FIXTURE_MESHES = {
    "tetrahedron": shapes.tetrahedron,
    "cube": shapes.cube,
    "icosphere2": lambda: shapes.icosphere(2),
    "bowtie": shapes.bowtie_tetrahedra,
}
