"""
Sliding-window face detection
=============================

Two detectors over the same synthetic scenes: a hand-built Haar cascade on
an integral image, and a HOG + linear SVM scanner trained from scratch.
"""

import numpy as np

from facemorph.facedetect import (CascadeStage, HaarCascade, HaarFeature, Stump, cascade_detect, hog_descriptor,
                                  hog_scan, train_linear_svm)
from facemorph.imgcore import BoundingBox, integral_image
from facemorph.synthetic import BACKGROUND, random_face, render_face

rng = np.random.default_rng(1)


def face_patch():
    return render_face(random_face(rng) * (64 / 600), size=64, rng=rng)


def scene(at=None):
    img = np.clip(BACKGROUND + 4 * rng.standard_normal((192, 192)), 0, 255).astype(np.uint8)
    if at:
        img[at[1]:at[1] + 64, at[0]:at[0] + 64] = face_patch()
    return img


# Haar: a bright / dark / bright strip pattern marks the eye band
band = HaarFeature(((0, 0, 1, 1 / 3, 1.0), (0, 1 / 3, 1, 1 / 3, -2.0), (0, 2 / 3, 1, 1 / 3, 1.0)))
cascade = HaarCascade((24, 24), (CascadeStage((Stump(band, 60.0, 0.0, 1.0),), 1.0),))
img = np.full((80, 80), 200, np.uint8)
img[38:46, 30:54] = 20
hits = cascade_detect(integral_image(img), cascade, [1.0], step=1)
print("haar best window", hits[0][0], "score", hits[0][1])

# HOG + SVM: faces against background and off-centre crops
pos = [hog_descriptor(face_patch()) for _ in range(60)]
neg = []
for _ in range(30):
    fx, fy = rng.integers(0, 128, 2)
    s = scene((fx, fy))
    for _ in range(4):
        x, y = rng.integers(0, 128, 2)
        if abs(x - fx) > 16 or abs(y - fy) > 16:
            neg.append(hog_descriptor(s, BoundingBox(int(x), int(y), 64, 64)))
svm = train_linear_svm(pos, neg, C=10.0)
print("svm training accuracy", svm.train_accuracy)

for at in [(20, 100), (110, 30)]:
    box, score = hog_scan(scene(at), svm, stride=4)[0]
    print("face at", at, "-> detected", (box.x, box.y), "score %.2f" % score)
