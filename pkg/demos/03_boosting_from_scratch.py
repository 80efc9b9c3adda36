"""The boosted trees on their own: regression, classification and a saved model.

Run with ``python3 demos/03_boosting_from_scratch.py``.
"""

import json

import numpy as np

from moldqc.gbm import GbmHyperParams, GbmModel, balanced_class_weights, fit

rng = np.random.default_rng(0)
X = rng.normal(size=(1000, 6))
y = np.sin(2 * X[:, 0]) + 0.5 * X[:, 1] ** 2 + rng.normal(0, 0.1, 1000)

trace = []
model = fit(X, y, hp=GbmHyperParams(n_estimators=200, num_leaves=15, min_child_samples=10), trace=trace)
for it in (0, 9, 49, 199):
    print(f"iteration {it + 1:>3}: training MSE {np.mean((trace[it] - y) ** 2):.4f}")

# imbalanced classification with balanced class weights
labels = (X[:, 0] + 0.3 * rng.normal(size=1000) > 1.6).astype(float)
w = balanced_class_weights(labels)
print(f"\n{int(labels.sum())} positives of {len(labels)}, weight ratio {w[labels == 1][0] / w[labels == 0][0]:.1f}")
clf = fit(X, labels, w, GbmHyperParams(n_estimators=100, min_child_samples=10), objective="weighted_logistic")
pred = clf.predict_proba(X) >= 0.5
print(f"training sensitivity {np.mean(pred[labels == 1]):.3f}, specificity {np.mean(~pred[labels == 0]):.3f}")

# models are plain JSON and reload to bit-identical predictions
text = json.dumps(clf.to_json())
back = GbmModel.from_json(json.loads(text))
print(f"\nserialised model: {len(text) / 1024:.0f} KiB, identical after reload: "
      f"{back.predict(X).tobytes() == clf.predict(X).tobytes()}")
