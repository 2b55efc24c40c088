"""Uncertainty sampling against random sampling on a synthetic portfolio."""

from satselect.active import ActiveConfig, QueryStrategy, score
from satselect.evaluation import learning_curve, mean_curves, synthetic_dataset
from satselect.forest import ForestConfig

p = (0.7, 0.2, 0.1)
for s in (QueryStrategy.MIN_MARGIN, QueryStrategy.MAX_UNCERTAINTY, QueryStrategy.MAX_ENTROPY):
    print(f"{s.value:8s} {score(s, p):.4f}")

# 10 solvers, 10% of features missing; B0 is a tenth of the pool and both
# learners start from the same B0
d = synthetic_dataset(800, 20, 10, separation=6.0, missing_rate=0.1, seed=0)
cfg = ActiveConfig(b0_fraction=0.1, batch_size=25, label_budget=214)
points = learning_curve(d, ["margin", "passive"], cfg, ForestConfig(n_trees=33), seeds=range(4))

curves = mean_curves(points)
print("train  margin  passive")
for size in curves[QueryStrategy.MIN_MARGIN]:
    print(f"{size:5d}  {curves[QueryStrategy.MIN_MARGIN][size]:.3f}   "
          f"{curves[QueryStrategy.RANDOM_PASSIVE][size]:.3f}")
