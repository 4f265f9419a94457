"""
Levelling the eyes
==================

A face rolled by 18 degrees is rotated back about the midpoint of the eye
centroids and resampled to the 600x600 working frame.
"""

import math

import numpy as np

from facemorph.align import FivePointLandmarks, SimilarityTransform, align_face, eye_centroids, map_points, roll_angle
from facemorph.synthetic import face_shape, render_face

pts = face_shape()
roll = SimilarityTransform(math.radians(18), 1.0, (0.0, 0.0))
shift = np.array([300.0, 300.0]) - map_points(roll, [(300, 300)])[0]
pts = map_points(SimilarityTransform(roll.rotation, 1.0, tuple(shift)), pts)
img = render_face(pts, size=600)

# five points: the corners of each eye and the nose tip
lm = FivePointLandmarks.from_68(pts)
left, right = eye_centroids(lm)
print("measured roll %.2f deg" % math.degrees(roll_angle(left, right)))

aligned, t = align_face(img, lm)
l2, r2 = map_points(t, [left, right])
print("eye heights after alignment %.4f %.4f" % (l2[1], r2[1]))

# the transform maps any point back and forth
back = map_points(t.inverse(), map_points(t, pts))
print("round trip error %.1e" % np.abs(back - pts).max())
