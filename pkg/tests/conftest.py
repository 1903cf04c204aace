import os

import numpy as np
import pytest

from wavefeat.ingest import TimeSeriesDataset, load_ucr, merge
from wavefeat.mdwt import FeatureMatrix


def smooth_dataset(K_per_class=20, n=251, classes=('1', '2', '3'), seed=0, name='synthetic'):
    '''
    noisy sinusoids, one frequency per class
    '''
    rng = np.random.default_rng(seed)
    t = np.linspace(0.0, 1.0, n)
    labels, rows = [], []
    for i, c in enumerate(classes):
        for _ in range(K_per_class):
            phase = rng.uniform(0, 2 * np.pi)
            rows.append(np.sin(2 * np.pi * (i + 1) * t + phase) + 0.1 * rng.standard_normal(n))
            labels.append(c)
    return TimeSeriesDataset(tuple(labels), np.vstack(rows), name)


def matrix(X, labels):
    X = np.asarray(X, dtype=np.float64)
    provenance = tuple(('raw', 'x', k) for k in range(X.shape[1]))
    return FeatureMatrix(X, tuple(str(y) for y in labels), provenance, X.shape[1], {'kind': 'raw'})


def gaussian_blobs(K=200, A=4, seed=0, spread=1.0):
    rng = np.random.default_rng(seed)
    half = K // 2
    X = np.vstack([rng.normal(0.0, spread, (half, A)), rng.normal(4.0, spread, (K - half, A))])
    labels = ['A'] * half + ['B'] * (K - half)
    return X, labels


@pytest.fixture
def sinusoids():
    return smooth_dataset()


@pytest.fixture
def blobs():
    return gaussian_blobs()


@pytest.fixture
def ucr_root():
    root = os.environ.get('WAVEFEAT_UCR_DIR')
    if not root or not os.path.isdir(root):
        pytest.skip('WAVEFEAT_UCR_DIR is not set')
    return root


def load_merged(root, name):
    try:
        train, test = load_ucr(root, name)
    except Exception:
        pytest.skip(f'UCR dataset {name} not available under {root}')
    return train, test, merge(train, test)


def write_ucr(path, d, delimiter='\t'):
    with open(path, 'w') as f:
        for y, row in d.records():
            f.write(delimiter.join([y] + [repr(float(v)) for v in row]) + '\n')
    return str(path)
