import numpy as np
import pytest

from facemorph.imgcore import BoundingBox, preprocess
from facemorph.shaperegress import LandmarkSet, TrainConfig, train_shape_model
from facemorph.synthetic import random_face, render_face

# filled by test_acceptance, printed at the end of the run
ACCEPTANCE_LINES: list[str] = []


def pytest_terminal_summary(terminalreporter):
    if ACCEPTANCE_LINES:
        terminalreporter.section("acceptance criteria")
        for line in ACCEPTANCE_LINES:
            terminalreporter.write_line(line)


@pytest.fixture
def rng():
    return np.random.default_rng(12345)


FRAME = 200


def frame_dataset(n, seed, size=FRAME):
    """Pre-processed full-frame renders, boxed by the whole frame, as the pipeline sees them."""
    rng = np.random.default_rng(seed)
    box = BoundingBox(0, 0, size, size)
    out = []
    for _ in range(n):
        pts = random_face(rng) * (size / 600.0)
        img = preprocess(render_face(pts, size=size, rng=rng))
        out.append((img, box, LandmarkSet("68pt", pts)))
    return out


@pytest.fixture(scope="session")
def frame_model_68():
    """68-point model trained on full-frame synthetic faces."""
    return train_shape_model(frame_dataset(120, seed=7), TrainConfig.desk(seed=3, oversampling=10))


@pytest.fixture(scope="session")
def frame_model_5():
    data = [(img, box, LandmarkSet("5pt", lm.points[[36, 39, 42, 45, 33]]))
            for img, box, lm in frame_dataset(80, seed=8)]
    return train_shape_model(data, TrainConfig.desk(seed=4, oversampling=5))
