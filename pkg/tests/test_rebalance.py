import numpy as np
import pytest

from triagekit.errors import DomainError
from triagekit.rebalance import SmoteConfig, smote_resample


def two_class(rng, n_min=10, n_maj=90, p=4):
    X_min = rng.standard_normal((n_min, p)) + 3.0
    X_maj = rng.standard_normal((n_maj, p))
    X = np.vstack([X_maj, X_min])
    y = np.concatenate([np.zeros(n_maj), np.ones(n_min)]).astype(np.int8)
    return X, y


def lies_on_some_segment(point, originals, tol=1e-9):
    n = originals.shape[0]
    for i in range(n):
        for j in range(n):
            if i == j:
                continue
            a, b = originals[i], originals[j]
            direction = b - a
            denom_idx = np.argmax(np.abs(direction))
            if direction[denom_idx] == 0.0:
                if np.max(np.abs(point - a)) <= tol:
                    return True
                continue
            u = (point[denom_idx] - a[denom_idx]) / direction[denom_idx]
            if -tol <= u <= 1.0 + tol and np.max(np.abs(a + u * direction - point)) <= tol:
                return True
    return False


def test_two_point_minority_stays_on_segment():
    X = np.array([[0.0, 0.0], [1.0, 1.0], [5.0, -5.0], [6.0, -4.0], [7.0, -3.0],
                  [5.5, -4.5], [6.5, -3.5]])
    y = np.array([1, 1, 0, 0, 0, 0, 0], dtype=np.int8)
    X2, y2 = smote_resample(X, y, SmoteConfig(k_neighbors=1, seed=3))
    synthetic = X2[7:]
    assert synthetic.shape[0] == 3  # 5 majority -> minority target 5, had 2
    for s in synthetic:
        assert 0.0 - 1e-12 <= s[0] <= 1.0
        assert s[0] == pytest.approx(s[1], abs=1e-12)  # on the diagonal segment


def test_identical_minority_points_degenerate():
    X = np.vstack([np.zeros((3, 2)) + 2.0, np.random.default_rng(0).standard_normal((9, 2))])
    y = np.array([1] * 3 + [0] * 9, dtype=np.int8)
    X2, y2 = smote_resample(X, y, SmoteConfig(seed=1))
    synthetic = X2[y2 == 1][3:]
    assert np.allclose(synthetic, 2.0)


def test_ratio_arithmetic(rng):
    X, y = two_class(rng, n_min=10, n_maj=90)
    X2, y2 = smote_resample(X, y, SmoteConfig(target_ratio=1.0,
                                              undersample_majority=1.0, seed=0))
    assert int((y2 == 1).sum()) == 90  # 10 original + 80 synthetic
    assert int((y2 == 0).sum()) == 90


def test_every_synthetic_row_on_a_minority_segment(rng):
    X, y = two_class(rng, n_min=12, n_maj=38, p=3)
    X2, y2 = smote_resample(X, y, SmoteConfig(k_neighbors=4, seed=5))
    originals = X[y == 1]
    synthetic = X2[y2 == 1][12:]
    assert synthetic.shape[0] > 0
    for s in synthetic:
        assert lies_on_some_segment(s, originals)


def test_ratio_within_one_sample(rng):
    for ratio in (0.4, 0.7, 1.0):
        X, y = two_class(rng, n_min=7, n_maj=53)
        X2, y2 = smote_resample(X, y, SmoteConfig(target_ratio=ratio, seed=2))
        n_min = int((y2 == 1).sum())
        n_maj = int((y2 == 0).sum())
        assert abs(n_min - ratio * n_maj) <= 1.0


def test_undersample_majority(rng):
    X, y = two_class(rng, n_min=10, n_maj=80)
    X2, y2 = smote_resample(X, y, SmoteConfig(undersample_majority=0.5, seed=4))
    assert int((y2 == 0).sum()) == 40
    assert int((y2 == 1).sum()) == 40  # ratio 1.0 against the kept majority


def test_seeded_determinism(rng):
    X, y = two_class(rng)
    a = smote_resample(X, y, SmoteConfig(seed=9))
    b = smote_resample(X, y, SmoteConfig(seed=9))
    assert np.array_equal(a[0], b[0]) and np.array_equal(a[1], b[1])
    c = smote_resample(X, y, SmoteConfig(seed=10))
    assert not np.array_equal(a[0], c[0])


def test_original_minority_retained(rng):
    X, y = two_class(rng, n_min=6, n_maj=30)
    X2, y2 = smote_resample(X, y, SmoteConfig(seed=0))
    kept = X2[y2 == 1][:6]
    assert np.array_equal(kept, X[y == 1])


def test_domain_errors(rng):
    X = rng.standard_normal((10, 2))
    with pytest.raises(DomainError):
        smote_resample(X, np.zeros(10, dtype=np.int8), SmoteConfig())
    y = np.zeros(10, dtype=np.int8)
    y[0] = 1
    with pytest.raises(DomainError):
        smote_resample(X, y, SmoteConfig())
    X_nan = X.copy()
    X_nan[0, 0] = np.nan
    y[1] = 1
    with pytest.raises(DomainError):
        smote_resample(X_nan, y, SmoteConfig())
