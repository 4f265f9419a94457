import math

import numpy as np
import pytest
from hypothesis import given, strategies as st

from facemorph.morphometrics import (CONVENTIONAL_EYE_MAP, CSV_HEADER, DegenerateGeometry, LandmarkIndexMap,
                                     area_ratios, distance_ratios, ellipse_area, extract_features,
                                     face_ellipse_area, nose_angle, polygon_area, triangle_angle)
from facemorph.shaperegress import LandmarkSet
from facemorph.synthetic import FaceParams, face_shape, random_face

from oracles import angle_oracle, fan_area


def norm(p, q):
    return math.sqrt((p[0] - q[0]) ** 2 + (p[1] - q[1]) ** 2)


def test_ratio_scale_invariance(rng):
    pts = random_face(rng)
    assert np.allclose(distance_ratios(pts), distance_ratios(3 * pts), rtol=1e-14)


def test_constructed_ratio_is_half():
    pts = np.zeros((68, 2))
    pts[:, 0] = np.arange(68)  # keeps unrelated points distinct
    m = LandmarkIndexMap()
    for (r0, r1), (b0, b1) in ((m.eyes, m.temples), (m.nose, m.cheekbones), (m.mouth, m.jaw)):
        pts[r0], pts[r1] = (0, 100), (1, 100)
        pts[b0], pts[b1] = (0, 200), (0, 202)
    assert distance_ratios(pts) == (0.5, 0.5, 0.5)


def test_ratios_match_coordinate_oracle(rng):
    for _ in range(50):
        p = random_face(rng)
        expect = (norm(p[39], p[40]) / norm(p[0], p[16]), norm(p[31], p[35]) / norm(p[2], p[14]),
                  norm(p[48], p[54]) / norm(p[4], p[12]))
        assert np.allclose(distance_ratios(p), expect, rtol=1e-12, atol=0)


def test_zero_baseline():
    pts = face_shape()
    pts[16] = pts[0]
    with pytest.raises(DegenerateGeometry, match="degenerate face geometry"):
        distance_ratios(pts)


def test_nose_angle_analytic():
    assert triangle_angle((0, 0), (-0.5, math.sqrt(3) / 2), (0.5, math.sqrt(3) / 2)) == pytest.approx(60, abs=1e-12)
    assert triangle_angle((0, 0), (-1, 1), (1, 1)) == pytest.approx(90, abs=1e-12)


def test_nose_angle_vector_oracle(rng):
    for _ in range(200):
        a, p, q = rng.uniform(-100, 100, (3, 2))
        assert abs(triangle_angle(a, p, q) - angle_oracle(a, p, q)) < 1e-9


def test_angle_sum_is_180(rng):
    for _ in range(200):
        a, p, q = rng.uniform(-100, 100, (3, 2))
        total = triangle_angle(a, p, q) + triangle_angle(p, a, q) + triangle_angle(q, a, p)
        assert abs(total - 180) < 1e-9


def test_degenerate_triangles():
    with pytest.raises(DegenerateGeometry, match="degenerate triangle"):
        triangle_angle((0, 0), (1, 1), (2, 2))
    with pytest.raises(DegenerateGeometry, match="degenerate triangle"):
        triangle_angle((0, 0), (0, 0), (2, 1))


def test_nose_angle_uses_mapped_points():
    pts = face_shape()
    assert nose_angle(pts) == triangle_angle(pts[27], pts[31], pts[35])


def test_ellipse_examples():
    assert ellipse_area(2, 2) == pytest.approx(math.pi)
    assert ellipse_area(4, 2) == pytest.approx(2 * math.pi)


def test_face_ellipse_formula(rng):
    for _ in range(20):
        p = random_face(rng)
        brow = (p[19] + p[24]) / 2
        expect = math.pi * (norm(p[1], p[15]) / 2) * (norm(p[8], brow) / 2)
        assert face_ellipse_area(p) == pytest.approx(expect, rel=1e-14)


def test_polygon_examples():
    assert polygon_area([(0, 0), (1, 0), (1, 1), (0, 1)]) == 1
    assert polygon_area([(0, 0), (1, 1), (2, 2)]) == 0
    with pytest.raises(ValueError, match="not a polygon"):
        polygon_area([(0, 0), (1, 1)])


def convex_polygon(rng, n):
    ang = np.sort(rng.uniform(0, 2 * math.pi, n))
    r = rng.uniform(1, 50)
    return np.column_stack([r * np.cos(ang), r * np.sin(ang)]) + rng.uniform(-100, 100, 2)


def test_polygon_fan_oracle_and_vertex_order(rng):
    for _ in range(100):
        p = convex_polygon(rng, int(rng.integers(3, 12)))
        a = polygon_area(p)
        assert abs(a - fan_area(p)) <= 1e-12 * max(1.0, a)
        assert polygon_area(p[::-1]) == pytest.approx(a, rel=1e-13)
        assert polygon_area(np.roll(p, 3, axis=0)) == pytest.approx(a, rel=1e-13)


def test_area_ratios_formula(rng):
    for _ in range(20):
        p = random_face(rng)
        face = math.pi * norm(p[1], p[15]) * norm(p[8], (p[19] + p[24]) / 2) / 4
        nose = abs((p[31][0] - p[27][0]) * (p[35][1] - p[27][1]) - (p[35][0] - p[27][0]) * (p[31][1] - p[27][1])) / 2
        mouth = math.pi * norm(p[48], p[54]) * norm(p[51], p[57]) / 4
        assert np.allclose(area_ratios(p), (nose / face, mouth / face), rtol=1e-12, atol=0)


def test_flat_mouth_and_scaling():
    p = face_shape()
    assert np.allclose(area_ratios(p), area_ratios(2 * p), rtol=1e-13)
    p[57] = p[51]
    assert area_ratios(p)[1] == 0


def test_area_ratios_increase_with_feature_size():
    r_nose = [area_ratios(face_shape(FaceParams(nose_w=w)))[0] for w in (50, 60, 70, 80)]
    r_mouth = [area_ratios(face_shape(FaceParams(mouth_h=h)))[1] for h in (30, 35, 40, 45)]
    assert all(np.diff(r_nose) > 0) and all(np.diff(r_mouth) > 0)


def test_template_features_compose_components():
    p = face_shape()
    f = extract_features(LandmarkSet("68pt", p))
    assert (f.r1_b1, f.r2_b2, f.r3_b3) == distance_ratios(p)
    assert f.nose_angle == nose_angle(p)
    assert (f.r_nose, f.r_mouth) == area_ratios(p)
    assert 0 < f.nose_angle < 180 and all(v > 0 for v in f.as_array())


def similarity(pts, theta, s, t, mirror=False):
    p = pts * [-1, 1] if mirror else pts
    c, sn = math.cos(theta), math.sin(theta)
    return s * p @ np.array([[c, -sn], [sn, c]]).T + t


def test_mirror_and_rotation_invariance(rng):
    p = random_face(rng)
    base = extract_features(p).as_array()
    assert np.allclose(extract_features(p * [-1, 1]).as_array(), base, rtol=1e-12)
    moved = similarity(p, math.radians(30), 1.0, [40, -25])
    assert np.abs(extract_features(moved).as_array() - base).max() < 1e-9


def test_degenerate_error_carries_map_context():
    p = face_shape()
    p[31] = p[35] = p[27]
    with pytest.raises(DegenerateGeometry, match="index map"):
        extract_features(p)


def test_index_map_validation_and_json():
    with pytest.raises(ValueError):
        LandmarkIndexMap(eyes=(39, 39))
    with pytest.raises(ValueError):
        LandmarkIndexMap(chin=68)
    m = LandmarkIndexMap.from_dict({"eyes": [39, 42]})
    assert m == CONVENTIONAL_EYE_MAP
    assert LandmarkIndexMap.from_dict(m.to_dict()) == m


def test_conventional_eye_map_changes_r1_only():
    p = face_shape()
    a, b = extract_features(p), extract_features(p, CONVENTIONAL_EYE_MAP)
    assert b.r1_b1 > a.r1_b1 and a.as_array()[1:].tolist() == b.as_array()[1:].tolist()


def test_csv_row_order():
    f = extract_features(face_shape())
    assert CSV_HEADER[3] == "nose_angle_deg"
    assert [float(v) for v in f.csv_row().split(",")] == f.as_array().tolist()


@given(st.floats(-math.pi, math.pi), st.floats(0.1, 10), st.floats(-1e3, 1e3), st.floats(-1e3, 1e3), st.booleans())
def test_similarity_invariance_property(theta, s, tx, ty, mirror):
    p = face_shape()
    base = extract_features(p).as_array()
    got = extract_features(similarity(p, theta, s, [tx, ty], mirror)).as_array()
    assert np.all(np.abs(got - base) <= 1e-9 * np.abs(base))
