"""Fit a minimum enclosing ball to a random 2D target class and look at it.

Walks through the basic objects: the synthetic target generator, a
single Gaussian kernel, the fitted model with its squared-radius
threshold, and outlier scores on a probe grid. Writes the decision
surface to demos/output/ball_surface.csv for external plotting
(columns x1, x2, outlier_score).
"""

from pathlib import Path

import numpy as np

import mksvdd

OUT = Path(__file__).parent / "output"
OUT.mkdir(exist_ok=True)

# a two-area target class; all labels are +1 by construction
train = mksvdd.gen_2d_target(seed=7, n_areas=2, n_points=60)
print(f"training set: {train.n_examples} points, {train.n_features} features")

dictionary = mksvdd.KernelDictionary.from_data([mksvdd.KernelSpec.rbf(0.5)], train)
model = mksvdd.fit_svdd(dictionary, [1.0], C=0.12)

print(f"squared-radius threshold : {model.threshold:.4f}")
print(f"support vectors          : {model.card} of {train.n_examples}")
print(f"margin SVs (on boundary) : {model.alpha.margin_sv_indices.size}")
print(f"bounded SVs (outside)    : {mksvdd.bounded_sv_indices(model).size}")

# every non-bounded training point must sit inside or on the ball
train_outlier_scores = mksvdd.train_scores(model)
inside = (train_outlier_scores <= 1e-9).sum()
print(f"training points accepted : {inside}")

# decision surface on a grid: positive score = outside the ball
axis = np.linspace(-2.0, 2.0, 80)
gx, gy = np.meshgrid(axis, axis)
grid = np.column_stack([gx.ravel(), gy.ravel()])
scores = mksvdd.score(model, grid)
accepted = (scores <= 0).mean()
print(f"grid area accepted       : {accepted:.1%}")

rows = np.column_stack([grid, scores])
header = "x1,x2,outlier_score"
np.savetxt(OUT / "ball_surface.csv", rows, delimiter=",", header=header, comments="")
print(f"wrote {OUT / 'ball_surface.csv'}")

# the one-class SVM counterpart draws the same boundary for Gaussian kernels
ocsvm = mksvdd.fit_ocsvm(dictionary, [1.0], C=0.12)
agreement = ((mksvdd.score(ocsvm, grid) > 0) == (scores > 0)).mean()
print(f"ocsvm decision agreement : {agreement:.1%}")
