"""
Decision trees (gain ratio or Gini, binary numeric splits) and a bagged random forest.

Ties are settled deterministically everywhere: equal split scores go to the lowest column,
then the lowest threshold; equal class counts or votes go to the class that comes first in
canonical order.
"""
import math
from functools import partial

import numpy as np
from scipy.special import xlogy
from sklearn.model_selection import train_test_split

from utils.logger import log
from wavefeat.common import (ConfigError, DataError, canonical_classes, default_params, label_index,
                             parallel_eval)

CRITERIA = ('gain_ratio', 'gini')
# split scores within this distance of the best count as tied
SCORE_TOL = 1e-9
# minimum impurity decrease for a split to count as informative
MIN_GAIN = 1e-12
_LN2 = math.log(2.0)


def _entropy_sum(counts):
    # sum_c c*ln(c) over the last axis
    return xlogy(counts, counts).sum(axis=-1)


def split_scores(left, total, criterion, distinct=None):
    '''
    Score every candidate partition.
    param left: (..., C) class counts sent left; total: (C,) class counts at the node
    param distinct: number of distinct values per column, enables the C4.5 threshold-cost correction
    returns (score, gain) with gain the impurity decrease used for the positive-gain test
    '''
    left = np.asarray(left, dtype=np.float64)
    total = np.asarray(total, dtype=np.float64)
    right = total - left
    N = total.sum()
    nl = left.sum(axis=-1)
    nr = right.sum(axis=-1)
    with np.errstate(divide='ignore', invalid='ignore'):
        if criterion == 'gini':
            parent = N - (total ** 2).sum() / N
            children = (nl - (left ** 2).sum(axis=-1) / nl) + (nr - (right ** 2).sum(axis=-1) / nr)
            gain = (parent - children) / N
            return gain, gain
        if criterion == 'gain_ratio':
            parent = xlogy(N, N) - _entropy_sum(total)
            children = (xlogy(nl, nl) - _entropy_sum(left)) + (xlogy(nr, nr) - _entropy_sum(right))
            gain = (parent - children) / (N * _LN2)
            if distinct is not None:
                gain = gain - np.log2(np.maximum(distinct - 1, 1)) / N
            split_info = (xlogy(N, N) - xlogy(nl, nl) - xlogy(nr, nr)) / (N * _LN2)
            return gain / split_info, gain
    raise ConfigError(f'unknown split criterion {criterion!r}; use one of {CRITERIA}')


def best_split(X, y, n_classes, columns, criterion, min_leaf=1, mdl_correction=False):
    '''
    Exhaustive search over (column, midpoint) candidates.
    param y: class indices; columns: ascending column indices to search
    returns (column, threshold, score) or None if no split has positive gain
    '''
    columns = np.asarray(columns, dtype=np.int64)
    N = X.shape[0]
    if N < 2 * min_leaf or columns.size == 0:
        return None
    Xc = X[:, columns]
    order = np.argsort(Xc, axis=0, kind='stable')
    values = np.take_along_axis(Xc, order, axis=0)
    onehot = np.eye(n_classes)[y]
    cum = np.cumsum(onehot[order], axis=0)  # (N, m, C)
    total = cum[-1, 0]

    left = cum[:-1]  # position i sends the first i + 1 sorted records left
    n_left = np.arange(1, N)[:, None]
    valid = (values[:-1] < values[1:]) & (n_left >= min_leaf) & (N - n_left >= min_leaf)
    distinct = None
    if mdl_correction and criterion == 'gain_ratio':
        distinct = (values[1:] != values[:-1]).sum(axis=0) + 1
    score, gain = split_scores(left, total, criterion, distinct)
    valid &= gain > MIN_GAIN
    if not valid.any():
        return None
    score = np.where(valid, score, -np.inf)

    # column-major scan: lowest column first, then lowest threshold
    flat = score.T.ravel()
    best = flat.max()
    pick = int(np.flatnonzero(flat >= best - SCORE_TOL)[0])
    j, i = divmod(pick, N - 1)
    lo, hi = values[i, j], values[i + 1, j]
    threshold = lo + (hi - lo) / 2.0
    if not lo <= threshold < hi:
        threshold = lo
    return int(columns[j]), float(threshold), float(flat[pick])


class DecisionTree:
    """
    Binary tree in flat arrays. Node i is a leaf when feature[i] == -1; otherwise rows with
    x[feature[i]] <= threshold[i] go to left[i], the rest to right[i].
    """
    def __init__(self, classes, n_features, criterion):
        self.classes = list(classes)
        self.n_features = n_features
        self.criterion = criterion
        self.feature = []
        self.threshold = []
        self.left = []
        self.right = []
        self.counts = []
        self.depth = []

    def _add_node(self, counts, depth):
        self.feature.append(-1)
        self.threshold.append(0.0)
        self.left.append(-1)
        self.right.append(-1)
        self.counts.append(np.asarray(counts, dtype=np.int64))
        self.depth.append(depth)
        return len(self.feature) - 1

    def _finalize(self):
        self.feature = np.asarray(self.feature, dtype=np.int64)
        self.threshold = np.asarray(self.threshold, dtype=np.float64)
        self.left = np.asarray(self.left, dtype=np.int64)
        self.right = np.asarray(self.right, dtype=np.int64)
        self.counts = np.vstack(self.counts).astype(np.int64)
        self.depth = np.asarray(self.depth, dtype=np.int64)
        return self

    @property
    def node_count(self):
        return int(self.feature.size)

    @property
    def leaf_count(self):
        return int((self.feature == -1).sum())

    @property
    def max_depth(self):
        return int(self.depth.max())

    def size_stats(self):
        return {'nodes': self.node_count, 'leaves': self.leaf_count, 'depth': self.max_depth}

    def leaf_value(self):
        # argmax returns the first maximum, i.e. the canonical tie-break
        return np.argmax(self.counts, axis=1)

    def apply(self, X):
        '''
        leaf index reached by each row of X
        '''
        X = np.asarray(X, dtype=np.float64)
        node = np.zeros(X.shape[0], dtype=np.int64)
        active = self.feature[node] != -1
        while active.any():
            rows = np.flatnonzero(active)
            current = node[rows]
            go_left = X[rows, self.feature[current]] <= self.threshold[current]
            node[rows] = np.where(go_left, self.left[current], self.right[current])
            active = self.feature[node] != -1
        return node

    def predict_index(self, X):
        return self.leaf_value()[self.apply(X)]

    def _node_dict(self, node):
        counts = dict(zip(self.classes, self.counts[node].tolist()))
        if self.feature[node] == -1:
            return {'leaf': self.classes[int(np.argmax(self.counts[node]))], 'counts': counts}
        return {'counts': counts, 'column': int(self.feature[node]), 'threshold': float(self.threshold[node]),
                'left': self._node_dict(int(self.left[node])), 'right': self._node_dict(int(self.right[node]))}

    def to_dict(self):
        return {'criterion': self.criterion, 'classes': self.classes, 'n_features': self.n_features,
                'root': self._node_dict(0)}

    @classmethod
    def from_dict(cls, d):
        tree = cls(d['classes'], d['n_features'], d['criterion'])
        stack = [(d['root'], 0, None, None)]
        while stack:
            obj, depth, parent, side = stack.pop()
            counts = [obj['counts'][c] for c in tree.classes]
            i = tree._add_node(counts, depth)
            if parent is not None:
                getattr(tree, side)[parent] = i
            if 'leaf' not in obj:
                tree.feature[i] = obj['column']
                tree.threshold[i] = obj['threshold']
                stack.append((obj['right'], depth + 1, i, 'right'))
                stack.append((obj['left'], depth + 1, i, 'left'))
        return tree._finalize()

    def prune(self, X_val, y_val):
        '''
        Reduced-error pruning: collapse a subtree into a leaf whenever that does not add
        validation errors. Children always have larger indices than their parents.
        '''
        C = len(self.classes)
        val_counts = np.zeros((self.node_count, C), dtype=np.int64)
        node = np.zeros(len(y_val), dtype=np.int64)
        np.add.at(val_counts, (node, y_val), 1)
        active = self.feature[node] != -1
        while active.any():
            rows = np.flatnonzero(active)
            current = node[rows]
            go_left = X_val[rows, self.feature[current]] <= self.threshold[current]
            node[rows] = np.where(go_left, self.left[current], self.right[current])
            np.add.at(val_counts, (node[rows], y_val[rows]), 1)
            active = self.feature[node] != -1

        prediction = self.leaf_value()
        leaf_errors = val_counts.sum(axis=1) - val_counts[np.arange(self.node_count), prediction]
        subtree_errors = leaf_errors.copy()
        pruned = 0
        for i in range(self.node_count - 1, -1, -1):
            if self.feature[i] == -1:
                continue
            below = subtree_errors[self.left[i]] + subtree_errors[self.right[i]]
            if leaf_errors[i] <= below:
                self.feature[i] = -1
                pruned += 1
            else:
                subtree_errors[i] = below
        self._compact()
        log.debug(f'Pruned {pruned} subtrees, {self.node_count} nodes left')
        return self

    def _compact(self):
        keep, stack = [], [0]
        while stack:
            i = stack.pop()
            keep.append(i)
            if self.feature[i] != -1:
                stack += [self.right[i], self.left[i]]
        keep = np.sort(np.asarray(keep))
        remap = -np.ones(self.node_count, dtype=np.int64)
        remap[keep] = np.arange(keep.size)
        leaf = self.feature[keep] == -1
        self.left = np.where(leaf, -1, remap[self.left[keep]])
        self.right = np.where(leaf, -1, remap[self.right[keep]])
        self.feature = self.feature[keep]
        self.threshold = np.where(leaf, 0.0, self.threshold[keep])
        self.counts = self.counts[keep]
        self.depth = self.depth[keep]


def _grow(X, y, n_classes, classes, criterion, min_leaf, max_depth, mtry=None, rng=None,
          mdl_correction=False):
    tree = DecisionTree(classes, X.shape[1], criterion)
    A = X.shape[1]
    root = tree._add_node(np.bincount(y, minlength=n_classes), 0)
    stack = [(root, np.arange(X.shape[0]))]
    while stack:
        node, idx = stack.pop()
        counts = tree.counts[node]
        depth = tree.depth[node]
        if np.count_nonzero(counts) <= 1 or idx.size < 2 * min_leaf:
            continue
        if max_depth is not None and depth >= max_depth:
            continue
        Xn, yn = X[idx], y[idx]
        if mtry is None or mtry >= A:
            split = best_split(Xn, yn, n_classes, np.arange(A), criterion, min_leaf, mdl_correction)
        else:
            # sampled columns first; fall back to the rest when none of them can split
            perm = rng.permutation(A)
            split = best_split(Xn, yn, n_classes, np.sort(perm[:mtry]), criterion, min_leaf, mdl_correction)
            if split is None:
                split = best_split(Xn, yn, n_classes, np.sort(perm[mtry:]), criterion, min_leaf, mdl_correction)
        if split is None:
            continue
        column, threshold, _ = split
        goes_left = Xn[:, column] <= threshold
        left_idx, right_idx = idx[goes_left], idx[~goes_left]
        tree.feature[node] = column
        tree.threshold[node] = threshold
        tree.left[node] = tree._add_node(np.bincount(y[left_idx], minlength=n_classes), depth + 1)
        tree.right[node] = tree._add_node(np.bincount(y[right_idx], minlength=n_classes), depth + 1)
        stack.append((tree.right[node], right_idx))
        stack.append((tree.left[node], left_idx))
    return tree._finalize()


def _encode(train, classes=None):
    if train.K == 0:
        raise DataError('cannot train on an empty training set')
    if train.A == 0:
        raise DataError('cannot train on a feature matrix with no columns')
    classes = canonical_classes(train.labels) if classes is None else list(classes)
    return np.asarray(train.values, dtype=np.float64), label_index(train.labels, classes), classes


def train_tree(train, criterion='gain_ratio', min_leaf=2, max_depth=None, mdl_correction=False,
               prune_fraction=0.0, seed=0, classes=None):
    '''
    Greedy top-down induction on a FeatureMatrix.
    param prune_fraction: hold out this share of the records for reduced-error pruning (0 = off)
    '''
    if criterion not in CRITERIA:
        raise ConfigError(f'unknown split criterion {criterion!r}; use one of {CRITERIA}')
    if min_leaf < 1:
        raise ConfigError(f'min_leaf must be >= 1, got {min_leaf}')
    if not 0.0 <= prune_fraction < 1.0:
        raise ConfigError(f'prune_fraction must lie in [0, 1), got {prune_fraction}')
    X, y, classes = _encode(train, classes)
    if prune_fraction > 0.0:
        idx = np.arange(X.shape[0])
        try:
            grow_idx, val_idx = train_test_split(idx, test_size=prune_fraction, random_state=seed, stratify=y)
        except ValueError:
            grow_idx, val_idx = train_test_split(idx, test_size=prune_fraction, random_state=seed)
        tree = _grow(X[grow_idx], y[grow_idx], len(classes), classes, criterion, min_leaf, max_depth,
                     mdl_correction=mdl_correction)
        tree = tree.prune(X[val_idx], y[val_idx])
    else:
        tree = _grow(X, y, len(classes), classes, criterion, min_leaf, max_depth, mdl_correction=mdl_correction)
    log.debug(f'{criterion} tree on {X.shape[0]} x {X.shape[1]}: {tree.node_count} nodes, depth {tree.max_depth}')
    return tree


def _grow_member(t, X, y, classes, seed, mtry, min_leaf, max_depth, bootstrap):
    rng = np.random.default_rng([seed, t])
    K = X.shape[0]
    sample = rng.integers(0, K, size=K) if bootstrap else np.arange(K)
    tree = _grow(X[sample], y[sample], len(classes), classes, 'gini', min_leaf, max_depth, mtry, rng)
    oob = np.setdiff1d(np.arange(K), sample) if bootstrap else np.zeros(0, dtype=np.int64)
    return tree, oob


class ForestModel:
    def __init__(self, trees, classes, n_features, mtry, seed, min_leaf=1, bootstrap=True, oob_estimate=None):
        self.trees = trees
        self.classes = classes
        self.n_features = n_features
        self.mtry = mtry
        self.seed = seed
        self.min_leaf = min_leaf
        self.bootstrap = bootstrap
        self.oob_estimate = oob_estimate

    @property
    def T(self):
        return len(self.trees)

    def votes(self, X):
        X = np.asarray(X, dtype=np.float64)
        votes = np.zeros((X.shape[0], len(self.classes)), dtype=np.int64)
        rows = np.arange(X.shape[0])
        for tree in self.trees:
            np.add.at(votes, (rows, tree.predict_index(X)), 1)
        return votes

    def predict_index(self, X):
        return np.argmax(self.votes(X), axis=1)

    def size_stats(self):
        nodes = [t.node_count for t in self.trees]
        return {'trees': self.T, 'nodes_total': int(np.sum(nodes)), 'nodes_mean': float(np.mean(nodes)),
                'leaves_mean': float(np.mean([t.leaf_count for t in self.trees])),
                'depth_mean': float(np.mean([t.max_depth for t in self.trees]))}

    def to_dict(self):
        return {'T': self.T, 'mtry': self.mtry, 'seed': self.seed, 'min_leaf': self.min_leaf,
                'bootstrap': self.bootstrap, 'oob_estimate': self.oob_estimate, 'classes': self.classes,
                'n_features': self.n_features, 'trees': [t.to_dict() for t in self.trees]}

    @classmethod
    def from_dict(cls, d):
        return cls([DecisionTree.from_dict(t) for t in d['trees']], d['classes'], d['n_features'], d['mtry'],
                   d['seed'], d['min_leaf'], d['bootstrap'], d['oob_estimate'])


def train_forest(train, T=100, mtry=None, seed=0, min_leaf=1, max_depth=None, bootstrap=True,
                 classes=None, pool=None):
    '''
    T Gini trees, each on a bootstrap sample with mtry candidate columns per split.
    Tree t draws from its own stream seeded by (seed, t), so the pool schedule does not matter.
    '''
    if T < 1:
        raise ConfigError(f'a forest needs at least one tree, got T={T}')
    if min_leaf < 1:
        raise ConfigError(f'min_leaf must be >= 1, got {min_leaf}')
    X, y, classes = _encode(train, classes)
    A = X.shape[1]
    mtry = max(1, int(math.floor(math.sqrt(A)))) if mtry is None else int(mtry)
    if not 1 <= mtry <= A:
        raise ConfigError(f'mtry must lie in [1, {A}], got {mtry}')

    grow = partial(_grow_member, X=X, y=y, classes=classes, seed=seed, mtry=mtry, min_leaf=min_leaf,
                   max_depth=max_depth, bootstrap=bootstrap)
    members = parallel_eval(grow, range(T), pool, {'parallel': pool is not None})
    trees = [tree for tree, _ in members]

    oob_estimate = None
    if bootstrap:
        votes = np.zeros((X.shape[0], len(classes)), dtype=np.int64)
        for tree, oob in members:
            if oob.size:
                np.add.at(votes, (oob, tree.predict_index(X[oob])), 1)
        voted = votes.sum(axis=1) > 0
        if voted.any():
            oob_estimate = float(np.mean(np.argmax(votes[voted], axis=1) == y[voted]) * 100.0)
    model = ForestModel(trees, classes, A, mtry, seed, min_leaf, bootstrap, oob_estimate)
    log.debug(f'Forest of {T} trees (mtry={mtry}): {model.size_stats()["nodes_mean"]:.1f} nodes per tree, '
              f'OOB accuracy {oob_estimate}')
    return model


def predict(model, row):
    '''
    class label for one feature vector
    '''
    row = np.asarray(row, dtype=np.float64)
    if row.ndim != 1 or row.size != model.n_features:
        raise DataError(f'row width {row.size} does not match the training width {model.n_features}')
    return model.classes[int(model.predict_index(row[None, :])[0])]


def predict_many(model, X):
    X = np.asarray(X, dtype=np.float64)
    if X.ndim != 2 or X.shape[1] != model.n_features:
        raise DataError(f'feature width {X.shape[-1]} does not match the training width {model.n_features}')
    return [model.classes[i] for i in model.predict_index(X)]


SUPPORTED_CLASSIFIERS = ('j48', 'cart', 'rforest')
_UNSUPPORTED = ('forestpa', 'sysfor')


class ClassifierConfig:
    def __init__(self, name, params=None):
        self.name = name.lower()
        self.params = dict(params) if params else {}
        if self.name in _UNSUPPORTED:
            raise ConfigError(f'classifier {self.name!r} is unsupported; available: {", ".join(SUPPORTED_CLASSIFIERS)}')
        if self.name not in SUPPORTED_CLASSIFIERS:
            raise ConfigError(f'unknown classifier {self.name!r}; available: {", ".join(SUPPORTED_CLASSIFIERS)}')

    def resolved(self):
        '''
        parameters with defaults filled in, as they will be used
        '''
        p = dict(self.params)
        if self.name == 'rforest':
            return {'T': p.get('T', default_params['trees']), 'mtry': p.get('mtry'),
                    'min_leaf': p.get('min_leaf', 1), 'max_depth': p.get('max_depth'),
                    'bootstrap': p.get('bootstrap', True)}
        resolved = {'criterion': 'gain_ratio' if self.name == 'j48' else 'gini',
                    'min_leaf': p.get('min_leaf', default_params['min_leaf']), 'max_depth': p.get('max_depth')}
        if self.name == 'j48':
            resolved['mdl_correction'] = p.get('mdl_correction', False)
        else:
            resolved['prune_fraction'] = p.get('prune_fraction', 0.0)
        return resolved

    def fit(self, train, seed=0, classes=None, pool=None):
        p = self.resolved()
        if self.name == 'rforest':
            return train_forest(train, seed=seed, classes=classes, pool=pool, **p)
        return train_tree(train, seed=seed, classes=classes, **p)

    def describe(self):
        return {'name': self.name, **self.resolved()}
