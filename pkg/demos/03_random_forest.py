"""Growing the entropy-split random forest and inspecting what it learned."""

import numpy as np

from satselect import forest
from satselect.evaluation import kfold_cv, synthetic_dataset
from satselect.forest import ForestConfig, RandomForestModel

# one split is enough here: x <= 2.5 separates the labels perfectly
X = np.array([[1.0], [2.0], [3.0], [4.0]])
y = np.array([0, 0, 1, 1])
print(forest.best_split(X, y, [0]))        # (feature, threshold, gain in bits)

single = forest.fit(X, y, ForestConfig(n_trees=1, bootstrap=False, feature_subset_size=1))
print(single.trees[0][0].to_dict())

# default forest: 99 trees, each on a bootstrap sample and floor(log2 k) + 1 features
d = synthetic_dataset(400, 20, 3, separation=6.0, seed=0)
model = forest.fit(d.X, d.y, ForestConfig(seed=3))
print("features per tree:", len(model.trees[0][1]))
print("class probabilities of the first rows:")
print(np.round(model.predict_proba(d.X[:4]), 3))

# the serialized model reloads bit for bit
text = model.to_json()
print("round trip exact:", RandomForestModel.from_json(text).to_json() == text)

# ten-fold cross-validation on a harder variant
hard = synthetic_dataset(400, 20, 3, separation=3.0, missing_rate=0.1, seed=0)
print(kfold_cv(hard, ForestConfig(n_trees=25), folds=10).table())
