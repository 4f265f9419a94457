"""
Training a landmark cascade
===========================

A small ensemble-of-regression-trees model is trained on rendered faces
and compared with simply placing the mean shape in the face box.
"""

import time

import numpy as np

from facemorph.shaperegress import ShapeModel, TrainConfig, predict_shape, train_shape_model
from facemorph.synthetic import synthetic_dataset

train = synthetic_dataset(200, size=160, seed=100)
test = synthetic_dataset(50, size=160, seed=200)

t0 = time.perf_counter()
model = train_shape_model(train, TrainConfig.desk())
print("trained %d stages x %d trees in %.1f s" % (len(model.stages), len(model.stages[0].trees),
                                                   time.perf_counter() - t0))
print("training loss per stage", np.round(model.train_loss, 6))


def error(m):
    return np.mean([np.linalg.norm(predict_shape(img, box, m).points - lm.points, axis=1).mean()
                    for img, box, lm in test])


baseline = error(ShapeModel(model.scheme, model.mean_shape))
print("mean shape error %.2f px, cascade error %.2f px" % (baseline, error(model)))
