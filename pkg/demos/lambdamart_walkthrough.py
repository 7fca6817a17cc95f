"""Train the boosted ranker on synthetic groups and look inside it."""

import numpy as np

from totsearch.ltr import (
    FEATURE_NAMES,
    LambdaMartParams,
    LtrGroup,
    feature_importance,
    lambda_gradients,
    split_groups,
    train_lambdamart,
)

rng = np.random.default_rng(0)

# one gradient step by hand: the relevant item sits last
grad, hess = lambda_gradients(np.array([0.3, 0.2, 0.1]), np.array([0, 0, 2]))
print("gradients:", np.round(grad, 4), "hessians:", np.round(hess, 4))

# grades depend on the dense score and, more weakly, on pageviews
groups = []
for g in range(200):
    X = rng.random((16, len(FEATURE_NAMES)))
    signal = X[:, FEATURE_NAMES.index("dense_score")] + 0.3 * X[:, FEATURE_NAMES.index("pageviews_normalized")]
    labels = np.zeros(16, dtype=int)
    labels[np.argsort(-signal)[:5]] = 1
    labels[np.argmax(signal)] = 2
    groups.append(LtrGroup(f"g{g}", [f"x{i}" for i in range(16)], X, labels))

train, valid = split_groups(groups, 0.8, seed=0)
model = train_lambdamart(train, LambdaMartParams(), 60, valid)
for row in model.history[::10]:
    print({k: round(v, 4) for k, v in row.items()})

print("\nfeature importance (total gain):")
for name, gain in sorted(feature_importance(model).items(), key=lambda p: -p[1]):
    print(f"  {name:20s} {gain:10.2f}")
