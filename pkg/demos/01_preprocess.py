"""
Histogram equalization and median filtering
===========================================

A synthetic face is rendered with low contrast and salt noise, then
cleaned up the way every image is before detection.
"""

import numpy as np

from facemorph.imgcore import equalize_histogram, median_filter, preprocess
from facemorph.synthetic import random_face, render_face

rng = np.random.default_rng(0)
face = render_face(random_face(rng) * 0.4, size=240, rng=rng)

# squash the range to 100..160 and sprinkle salt
dull = (100 + face.astype(float) * 60 / 255).astype(np.uint8)
salt = rng.random(dull.shape) < 0.01
dull[salt] = 255
print("input range", dull.min(), dull.max(), "salt pixels", salt.sum())

eq = equalize_histogram(dull)
print("equalized range", eq.min(), eq.max())

clean = median_filter(dull, radius=1)
print("salt pixels left after 3x3 median", int(np.sum(clean[salt] == 255)))

# the pipeline default equalizes first, then filters
out = preprocess(dull)
print("preprocessed mean/std %.1f / %.1f" % (out.mean(), out.std()))
