import json
import math

import numpy as np
import pytest

from conftest import gaussian_blobs, matrix
from utils.logger import log
from wavefeat.common import ConfigError, DataError, make_pool
from wavefeat.forest import (MIN_GAIN, SCORE_TOL, ClassifierConfig, DecisionTree, ForestModel, best_split,
                             predict, predict_many, train_forest, train_tree)


def _impurity(counts, criterion):
    n = sum(counts)
    if criterion == 'gini':
        return 1.0 - sum((c / n) ** 2 for c in counts)
    return -sum(c / n * math.log2(c / n) for c in counts if c)


def brute_force_split(X, y, n_classes, criterion, min_leaf):
    '''
    every (column, midpoint) in ascending order; first one within SCORE_TOL of the best wins
    '''
    N = len(y)
    parent = [int(np.sum(y == c)) for c in range(n_classes)]
    candidates = []
    for j in range(X.shape[1]):
        values = sorted(set(X[:, j]))
        for lo, hi in zip(values[:-1], values[1:]):
            threshold = (lo + hi) / 2.0
            left = [int(np.sum((X[:, j] <= threshold) & (y == c))) for c in range(n_classes)]
            right = [p - l for p, l in zip(parent, left)]
            nl, nr = sum(left), sum(right)
            if nl < min_leaf or nr < min_leaf:
                continue
            gain = _impurity(parent, criterion) - nl / N * _impurity(left, criterion) \
                - nr / N * _impurity(right, criterion)
            if gain <= MIN_GAIN:
                continue
            if criterion == 'gini':
                score = gain
            else:
                split_info = -(nl / N * math.log2(nl / N) + nr / N * math.log2(nr / N))
                score = gain / split_info
            candidates.append((j, threshold, score))
    if not candidates:
        return None
    best = max(s for _, _, s in candidates)
    return next(c for c in candidates if c[2] >= best - SCORE_TOL)


@pytest.mark.parametrize('criterion', ['gini', 'gain_ratio'])
def test_split_search_matches_brute_force(criterion):
    rng = np.random.default_rng(0 if criterion == 'gini' else 1)
    for _ in range(200):
        K = int(rng.integers(2, 51))
        A = int(rng.integers(1, 6))
        C = int(rng.integers(2, 4))
        # small integer grid so equal scores and repeated values are common
        X = rng.integers(0, 6, size=(K, A)).astype(np.float64)
        y = rng.integers(0, C, size=K)
        min_leaf = int(rng.integers(1, 3))
        ours = best_split(X, y, C, np.arange(A), criterion, min_leaf)
        oracle = brute_force_split(X, y, C, criterion, min_leaf)
        if oracle is None:
            assert ours is None
            continue
        assert ours is not None
        assert ours[0] == oracle[0]
        assert ours[1] == pytest.approx(oracle[1], rel=1e-12, abs=1e-12)
        assert ours[2] == pytest.approx(oracle[2], rel=1e-9, abs=1e-12)


@pytest.mark.parametrize('criterion', ['gini', 'gain_ratio'])
def test_one_dimensional_example(criterion):
    train = matrix([[0.0], [1.0], [2.0], [3.0]], ['A', 'A', 'B', 'B'])
    tree = train_tree(train, criterion=criterion, min_leaf=1)
    assert tree.feature[0] == 0
    assert tree.threshold[0] == 1.5
    assert tree.node_count == 3
    assert predict(tree, [0.3]) == 'A'
    assert predict(tree, [2.6]) == 'B'
    assert predict(tree, [1.5]) == 'A'


def test_single_class_is_one_leaf():
    tree = train_tree(matrix(np.random.default_rng(0).standard_normal((10, 3)), ['x'] * 10))
    assert tree.node_count == 1
    assert predict(tree, [100.0, -100.0, 0.0]) == 'x'


def test_xor_needs_depth_two():
    rng = np.random.default_rng(3)
    X = rng.uniform(0, 1, size=(60, 2))
    labels = ['A' if (a > 0.5) == (b > 0.5) else 'B' for a, b in X]
    tree = train_tree(matrix(X, labels), criterion='gini', min_leaf=1)
    assert tree.max_depth >= 2
    assert predict_many(tree, X) == labels


@pytest.mark.parametrize('criterion', ['gini', 'gain_ratio'])
def test_distinct_rows_are_fit_exactly(criterion):
    rng = np.random.default_rng(4)
    X = rng.standard_normal((80, 3))
    labels = list(rng.choice(['1', '2', '3'], size=80))
    tree = train_tree(matrix(X, labels), criterion=criterion, min_leaf=1)
    assert predict_many(tree, X) == labels


def test_min_leaf_and_max_depth_are_respected():
    X, labels = gaussian_blobs(K=100, spread=3.0)
    tree = train_tree(matrix(X, labels), criterion='gini', min_leaf=5, max_depth=3)
    leaves = tree.feature == -1
    assert tree.max_depth <= 3
    assert tree.counts[leaves].sum(axis=1).min() >= 5
    assert tree.leaf_count == (tree.node_count + 1) // 2


def test_monotone_transform_keeps_predictions():
    rng = np.random.default_rng(5)
    X = rng.standard_normal((60, 4))
    labels = list(rng.choice(['a', 'b'], size=60))
    warped = np.exp(X) * 3.0 + X ** 3
    for criterion in ('gini', 'gain_ratio'):
        a = train_tree(matrix(X, labels), criterion=criterion, min_leaf=2)
        b = train_tree(matrix(warped, labels), criterion=criterion, min_leaf=2)
        assert predict_many(a, X) == predict_many(b, warped)
        np.testing.assert_array_equal(a.feature, b.feature)


def test_majority_leaf_tie_goes_to_first_class():
    tree = train_tree(matrix([[0.0], [0.0]], ['b', 'a']), min_leaf=1)
    assert tree.node_count == 1
    assert predict(tree, [0.0]) == 'a'


def test_mdl_correction_and_pruning_build_valid_trees():
    X, labels = gaussian_blobs(K=120, spread=2.5)
    j48 = train_tree(matrix(X, labels), criterion='gain_ratio', min_leaf=2, mdl_correction=True)
    assert j48.node_count >= 3
    X, labels = gaussian_blobs(K=120, spread=1.5)
    cart = train_tree(matrix(X, labels), criterion='gini', min_leaf=1, prune_fraction=0.3, seed=0)
    assert cart.leaf_count == (cart.node_count + 1) // 2
    assert np.all(cart.left[cart.feature != -1] > 0)
    assert np.mean(np.array(predict_many(cart, X)) == np.array(labels)) > 0.8


def test_training_errors():
    with pytest.raises(DataError):
        train_tree(matrix(np.zeros((0, 3)), []))
    with pytest.raises(ConfigError):
        train_tree(matrix([[0.0]], ['a']), criterion='entropy')
    with pytest.raises(ConfigError):
        train_forest(matrix([[0.0]], ['a']), T=0)
    with pytest.raises(ConfigError):
        train_forest(matrix([[0.0]], ['a']), mtry=2)
    with pytest.raises(ConfigError, match='min_leaf'):
        train_forest(matrix([[0.0]], ['a']), min_leaf=0)
    for bad in (1.0, 1.5, -0.1):
        with pytest.raises(ConfigError, match='prune_fraction'):
            train_tree(matrix([[0.0], [1.0]], ['a', 'b']), criterion='gini', prune_fraction=bad)


def test_width_mismatch():
    tree = train_tree(matrix([[0.0, 1.0], [1.0, 0.0]], ['a', 'b']), min_leaf=1)
    with pytest.raises(DataError):
        predict(tree, [0.0])
    with pytest.raises(DataError):
        predict_many(tree, np.zeros((3, 3)))


def test_forest_separates_blobs(blobs):
    X, labels = blobs
    rng = np.random.default_rng(0)
    order = rng.permutation(len(labels))
    train, test = order[:100], order[100:]
    model = train_forest(matrix(X[train], [labels[i] for i in train]), T=25, seed=0)
    accuracy = np.mean(np.array(predict_many(model, X[test])) == np.array([labels[i] for i in test]))
    assert accuracy >= 0.95
    assert model.mtry == 2
    assert model.oob_estimate is not None and model.oob_estimate >= 90.0


def test_forest_is_deterministic(blobs):
    X, labels = blobs
    a = train_forest(matrix(X, labels), T=10, seed=42)
    b = train_forest(matrix(X, labels), T=10, seed=42)
    probe = np.random.default_rng(9).uniform(-3, 7, size=(50, 4))
    assert predict_many(a, probe) == predict_many(b, probe)
    assert json.dumps(a.to_dict()) == json.dumps(b.to_dict())


def test_forest_is_schedule_independent(blobs):
    X, labels = blobs
    serial = train_forest(matrix(X, labels), T=8, seed=1)
    pool = make_pool(2)
    try:
        parallel = train_forest(matrix(X, labels), T=8, seed=1, pool=pool)
    finally:
        pool.close()
        pool.join()
    assert json.dumps(serial.to_dict()) == json.dumps(parallel.to_dict())


def test_degenerate_forest_is_a_gini_tree(blobs):
    X, labels = blobs
    fm = matrix(X, labels)
    forest = train_forest(fm, T=1, mtry=4, bootstrap=False, min_leaf=2, seed=3)
    tree = train_tree(fm, criterion='gini', min_leaf=2)
    assert forest.trees[0].to_dict() == tree.to_dict()
    assert forest.oob_estimate is None


def _leaf(label, classes=('A', 'B')):
    counts = {c: int(c == label) for c in classes}
    return DecisionTree.from_dict({'criterion': 'gini', 'classes': list(classes), 'n_features': 1,
                                   'root': {'leaf': label, 'counts': counts}})


def test_vote_tie_goes_to_canonical_first():
    model = ForestModel([_leaf('B'), _leaf('A')], ['A', 'B'], n_features=1, mtry=1, seed=0)
    assert predict(model, [0.0]) == 'A'
    model = ForestModel([_leaf('B'), _leaf('A'), _leaf('B')], ['A', 'B'], n_features=1, mtry=1, seed=0)
    assert predict(model, [0.0]) == 'B'


def test_model_json_round_trip(blobs):
    X, labels = blobs
    model = train_forest(matrix(X, labels), T=5, seed=2)
    back = ForestModel.from_dict(json.loads(json.dumps(model.to_dict())))
    assert predict_many(back, X) == predict_many(model, X)
    assert back.size_stats() == model.size_stats()
    tree = model.trees[0]
    assert DecisionTree.from_dict(tree.to_dict()).to_dict() == tree.to_dict()


def test_classifier_configs(blobs):
    X, labels = blobs
    fm = matrix(X, labels)
    for name in ('j48', 'cart', 'rforest'):
        cfg = ClassifierConfig(name, {'T': 5} if name == 'rforest' else {})
        model = cfg.fit(fm, seed=0)
        assert np.mean(np.array(predict_many(model, X)) == np.array(labels)) > 0.95
        assert cfg.describe()['name'] == name
    assert ClassifierConfig('j48').resolved()['criterion'] == 'gain_ratio'
    assert ClassifierConfig('cart').resolved()['criterion'] == 'gini'
    for name in ('forestpa', 'sysfor'):
        with pytest.raises(ConfigError, match='unsupported'):
            ClassifierConfig(name)
    with pytest.raises(ConfigError):
        ClassifierConfig('svm')


def test_tree_size_is_logged(monkeypatch):
    messages = []
    monkeypatch.setattr(log, 'debug', messages.append)
    tree = train_tree(matrix([[0.0], [1.0], [2.0], [3.0]], ['A', 'A', 'B', 'B']), min_leaf=1)
    assert any(f'{tree.node_count} nodes, depth {tree.max_depth}' in m for m in messages)
