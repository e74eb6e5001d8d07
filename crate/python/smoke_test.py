"""Smoke test for the robust_svm_py extension.

Build it with `maturin develop -m crates/py/Cargo.toml`, or copy the cdylib
from `cargo build -p robust-svm-py --release --features extension-module`
next to this script as robust_svm_py.so.
"""
import math

import robust_svm_py as rs

ds = rs.Dataset.gaussian_blobs(40, 2, separation=3.0, sigma=0.5, seed=1)
assert len(ds) == 40 and ds.dim == 2

clf, objective, _ = rs.train_regularized(ds, 0.5)
assert clf.classification_error(ds) < 0.1
assert abs(objective - (0.5 * math.hypot(*clf.w) + clf.empirical_hinge(ds))) < 1e-9

robust, robust_obj, separable = rs.train_robust(ds, 0.5)
if not separable:
    assert abs(robust_obj - objective) < 1e-6

worst, exact = rs.worst_case_loss(rs.LinearClassifier([1.0, -1.0], 0.5), ds, 0.3)
assert worst >= rs.LinearClassifier([1.0, -1.0], 0.5).empirical_hinge(ds)

kc, _ = rs.train_kernel(ds, 0.5, "rbf", 0.5)
assert kc.classification_error(ds) < 0.2
assert abs(rs.feature_distance([0.0], [1.0], "rbf", 1.0) - math.sqrt(2 - 2 * math.exp(-1))) < 1e-12

c = rs.calibrate_chance(m=1, dim=1, sigma=1.0, eta=0.1, draws=20000, seed=3)
assert abs(c - 1.6449) < 0.05, c  # 90% quantile of |N(0, 1)|
assert rs.bayes_regularizer([(0.5, 0.5), (1.5, 0.5)]) == 1.0

test = rs.Dataset.gaussian_blobs(40, 2, separation=3.0, sigma=0.5, seed=2)
matched, gamma = rs.max_pairings(ds, test, 1.0)
assert 0 <= matched <= 40 and abs(gamma - (1 - matched / 40)) < 1e-12
err, err_bound, hinge, hinge_bound = rs.generalization_bound(clf, ds, test, 1.0)
assert err <= err_bound and hinge <= hinge_bound

try:
    rs.Dataset([[0.0]], [2.0])
except ValueError:
    pass
else:
    raise AssertionError("label 2 accepted")

print("smoke test passed")
