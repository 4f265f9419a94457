import numpy as np
import pytest

from facemorph.imgcore import BoundingBox
from facemorph.shaperegress import (LandmarkSet, RegressionTree, ShapeModel, Stage, TrainConfig, load_landmarks,
                                    load_model, mean_shape, predict_normalized, predict_shape,
                                    sample_indexed_pixels, save_landmarks, save_model, to_box,
                                    train_shape_model)
from facemorph.synthetic import synthetic_cohorts, synthetic_dataset

MEAN5 = np.array([[0.2, 0.3], [0.4, 0.3], [0.6, 0.3], [0.8, 0.3], [0.5, 0.6]])


def ramp(h=50, w=60):
    return (np.arange(h)[:, None] * 3 + np.arange(w)[None, :]).astype(np.uint8)


def test_sample_zero_offset_reads_landmark_pixel():
    img = ramp()
    box = BoundingBox(5, 4, 40, 40)
    shape = MEAN5 + 0.01
    got = sample_indexed_pixels(img, box, shape, MEAN5, np.arange(5), np.zeros((5, 2)))
    px = np.floor(to_box(shape, box) + 0.5).astype(int)
    assert got.tolist() == [img[y, x] for x, y in px]


def test_sample_identity_warp_applies_offsets_unchanged():
    img = ramp()
    box = BoundingBox(0, 0, 40, 40)
    off = np.array([[0.1, 0.0], [0.0, -0.1]])
    got = sample_indexed_pixels(img, box, MEAN5, MEAN5, np.array([0, 4]), off)
    expect = [img[12, 12], img[20, 20]]  # (0.3,0.3)*40 and (0.5,0.5)*40
    assert got.tolist() == expect


def test_sample_scaled_estimate_scales_offsets():
    img = ramp(100, 100)
    box = BoundingBox(0, 0, 40, 40)
    shape = 2.0 * MEAN5
    off = np.array([[0.05, 0.05]])
    got = sample_indexed_pixels(img, box, shape, MEAN5, np.array([4]), off)
    # landmark at (1.0, 1.2), offset doubled to (0.1, 0.1) -> (44, 52) in pixels
    assert got.tolist() == [img[52, 44]]


def test_sample_outside_image_is_zero():
    img = np.full((10, 10), 9, np.uint8)
    got = sample_indexed_pixels(img, BoundingBox(0, 0, 10, 10), MEAN5, MEAN5, np.array([0, 1]),
                                np.array([[-5.0, 0.0], [0.0, 5.0]]))
    assert got.tolist() == [0, 0]


def test_empty_model_places_mean_in_box():
    model = ShapeModel("5pt", MEAN5)
    box = BoundingBox(17, 3, 80, 64)
    pred = predict_shape(np.zeros((100, 120), np.uint8), box, model)
    assert np.array_equal(pred.points, to_box(MEAN5, box))


def single_leaf_model(delta):
    tree = RegressionTree(np.zeros(0, np.intp), np.zeros(0, np.intp), np.zeros(0), delta[None])
    stage = Stage(np.array([0]), np.zeros((1, 2)), [tree])
    return ShapeModel("5pt", MEAN5, 1.0, [stage])


def test_single_leaf_tree_adds_displacement():
    delta = np.random.default_rng(1).normal(0, 0.05, (5, 2))
    model = single_leaf_model(delta)
    img = np.zeros((50, 50), np.uint8)
    assert np.allclose(predict_normalized(img, BoundingBox(0, 0, 50, 50), model), MEAN5 + delta, atol=1e-15)


def toy_box():
    return BoundingBox(0, 0, 40, 40)


def test_zero_residuals_give_zero_leaves():
    lm = LandmarkSet("5pt", to_box(MEAN5, toy_box()))
    rng = np.random.default_rng(0)
    data = [(rng.integers(0, 256, (40, 40), dtype=np.uint8), toy_box(), lm) for _ in range(4)]
    model = train_shape_model(data, TrainConfig(stages=2, trees=5, depth=2, pool_size=16, oversampling=1))
    assert all(not t.leaves.any() for s in model.stages for t in s.trees)


@pytest.mark.parametrize("oversampling", [1, 20])
def test_two_example_toy_reaches_zero_error(oversampling):
    top = np.zeros((40, 40), np.uint8)
    top[:20] = 255
    bottom = 255 - top
    shape_a = MEAN5 + [0.05, -0.04]
    shape_b = MEAN5 - [0.03, -0.06]
    data = [(top, toy_box(), LandmarkSet("5pt", to_box(shape_a, toy_box()))),
            (bottom, toy_box(), LandmarkSet("5pt", to_box(shape_b, toy_box())))]
    cfg = TrainConfig(stages=10, trees=50, depth=2, nu=0.5, pool_size=32, oversampling=oversampling)
    model = train_shape_model(data, cfg)
    assert model.train_loss[-1] < 1e-6 * model.train_loss[0]
    for img, box, lm in data:
        assert np.abs(predict_shape(img, box, model).points - lm.points).max() < 0.01


def test_insufficient_data_and_scheme_mismatch():
    lm = LandmarkSet("5pt", MEAN5 * 40)
    img = np.zeros((40, 40), np.uint8)
    with pytest.raises(ValueError, match="insufficient data"):
        train_shape_model([(img, toy_box(), lm)])
    lm68 = LandmarkSet("68pt", np.zeros((68, 2)))
    with pytest.raises(ValueError, match="scheme mismatch"):
        train_shape_model([(img, toy_box(), lm), (img, toy_box(), lm68)])


@pytest.fixture(scope="module")
def small_model():
    data = synthetic_dataset(40, size=120, seed=11)
    return data, train_shape_model(data, TrainConfig.desk(stages=4, trees=20, pool_size=48, oversampling=5, seed=2))


@pytest.mark.parametrize("cfg", [TrainConfig.desk(stages=3, trees=10, oversampling=1),
                                 TrainConfig.desk(stages=3, trees=10, depth=2, nu=1.0, oversampling=3, seed=9),
                                 TrainConfig.desk(stages=3, trees=10, depth=5, nu=0.3, lam=0.0, candidates=5)])
def test_training_loss_non_increasing(cfg):
    data = synthetic_dataset(20, size=100, seed=4)
    loss = train_shape_model(data, cfg).train_loss
    assert all(b <= a for a, b in zip(loss, loss[1:]))
    assert loss[-1] < loss[0]


def test_serialisation_is_bit_identical(small_model, tmp_path):
    data, model = small_model
    back = load_model(save_model(model, tmp_path / "m.json"))
    for img, box, _ in data[:10]:
        assert np.array_equal(predict_shape(img, box, model).points, predict_shape(img, box, back).points)


def test_box_translation_equivariance(small_model):
    data, model = small_model
    for img, box, _ in data[:5]:
        dx, dy = 13, 7
        moved = np.zeros((img.shape[0] + dy, img.shape[1] + dx), np.uint8)
        moved[dy:, dx:] = img
        mbox = BoundingBox(box.x + dx, box.y + dy, box.w, box.h)
        assert np.array_equal(predict_normalized(img, box, model), predict_normalized(moved, mbox, model))
        shift = predict_shape(moved, mbox, model).points - predict_shape(img, box, model).points
        assert np.abs(shift - [dx, dy]).max() < 1e-9


def test_mean_shape_examples():
    p = LandmarkSet("5pt", MEAN5 * 100)
    assert np.array_equal(mean_shape([p, p]).points, p.points)
    q = LandmarkSet("5pt", MEAN5 * 200)
    assert np.allclose(mean_shape([p, q]).points, MEAN5 * 150)
    with pytest.raises(ValueError, match="scheme mismatch"):
        mean_shape([p, LandmarkSet("68pt", np.zeros((68, 2)))])


def test_cohort_mean_faces_differ_where_generated():
    a, b = synthetic_cohorts(seed=1, pose=False)
    ma, mb = mean_shape(a).points, mean_shape(b).points
    # shorter nose bridge in cohort A pulls the nostrils up; taller outer lips
    nostril_gap = (ma[33, 1] - ma[27, 1]) / (mb[33, 1] - mb[27, 1])
    lip_gap = (ma[57, 1] - ma[51, 1]) / (mb[57, 1] - mb[51, 1])
    eye_gap = (ma[45, 0] - ma[36, 0]) / (mb[45, 0] - mb[36, 0])
    assert nostril_gap < 0.9 and lip_gap > 1.1 and abs(eye_gap - 1) < 0.03


def test_landmark_json_roundtrip(tmp_path):
    lm = LandmarkSet("5pt", MEAN5 * 123.456)
    save_landmarks(lm, tmp_path / "a.json", BoundingBox(1, 2, 3, 4))
    back, box = load_landmarks(tmp_path / "a.json")
    assert np.array_equal(back.points, lm.points) and box == BoundingBox(1, 2, 3, 4)
    with pytest.raises(ValueError):
        LandmarkSet("5pt", np.zeros((4, 2)))
