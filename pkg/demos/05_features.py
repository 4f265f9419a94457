"""
Six geometric features
======================

Distance ratios, the nose apex angle and two area ratios on the template
face, and what happens to them when the face is moved or mirrored.
"""

import numpy as np

from facemorph.morphometrics import CONVENTIONAL_EYE_MAP, FEATURE_LABELS, extract_features
from facemorph.synthetic import FaceParams, face_shape

pts = face_shape()
f = extract_features(pts)
for label, v in zip(FEATURE_LABELS, f.as_array()):
    print("%-10s %.5f" % (label, v))

# rotate by 40 degrees, scale, shift and mirror: nothing changes
c, s = np.cos(0.7), np.sin(0.7)
moved = 1.7 * pts @ np.array([[c, -s], [s, c]]).T * [-1, 1] + [12.0, -80.0]
print("max change under similarity + reflection %.1e" % np.abs(extract_features(moved).as_array() - f.as_array()).max())

# a shorter nose over a shorter face widens the angle but keeps the area ratio
short = extract_features(face_shape(FaceParams(nose_len=85.0, face_height=255.0)))
print("nose angle %.2f -> %.2f deg, RNose %.5f -> %.5f" % (f.nose_angle, short.nose_angle, f.r_nose, short.r_nose))

# inner eye corners instead of two corners of one eye
print("R1/B1 with eyes (39, 42): %.5f" % extract_features(pts, CONVENTIONAL_EYE_MAP).r1_b1)
