"""
Normalized partial energy sequences (NPES) and the energy-compaction ranking of candidate
wavelet filters.
"""
import numpy as np
import pandas as pd

from utils.logger import log
from wavefeat.common import ConfigError, DataError, resolve_rng
from wavefeat.wavelet import dwt, filter_bank


class NpesCurve:
    def __init__(self, values, source='raw', class_label=None):
        self.values = values  # C[M-1] for M = 1..n
        self.source = source
        self.class_label = class_label

    @property
    def n(self):
        return self.values.size

    def m_threshold(self, threshold):
        return m_threshold(self, threshold)

    def to_frame(self):
        return pd.DataFrame({'M': np.arange(1, self.n + 1), 'C': self.values})


def _npes_rows(X):
    # rows of X -> rows of cumulative energy fractions, largest magnitudes first
    energy = np.sort(np.asarray(X, dtype=np.float64) ** 2, axis=-1)[..., ::-1]
    cumulative = np.cumsum(energy, axis=-1)
    total = cumulative[..., -1:]
    if np.any(total <= 0.0):
        raise DataError('NPES is undefined for an all-zero vector (total energy is zero)')
    return cumulative / total


def npes(x, source='raw', class_label=None):
    x = np.asarray(x, dtype=np.float64)
    if x.ndim != 1 or x.size < 1:
        raise DataError('NPES needs a non-empty vector')
    return NpesCurve(_npes_rows(x), source, class_label)


def npes_of_transform(x, f, J0, class_label=None):
    '''
    NPES over all detail, smooth and extra coefficients of the level-J0 DWT of x
    '''
    d = dwt(x, f, J0)
    return npes(d.coefficients(), source=f'{d.filter}.J{J0}', class_label=class_label)


def m_threshold(curve, threshold):
    '''
    smallest M with C[M-1] >= threshold
    '''
    values = curve.values if isinstance(curve, NpesCurve) else np.asarray(curve)
    if not 0.0 < threshold <= 1.0:
        raise ConfigError(f'energy threshold must lie in (0, 1], got {threshold}')
    return int(min(np.searchsorted(values, threshold, side='left'), values.size - 1)) + 1


def _m_threshold_rows(C, threshold):
    # first index per row where the curve reaches the threshold
    reached = C >= threshold
    reached[..., -1] = True
    return np.argmax(reached, axis=-1) + 1


def sample_exemplars(d, exemplars_per_class, seed):
    '''
    {class: sorted record indices}, at most exemplars_per_class per class, seeded
    '''
    if exemplars_per_class < 1:
        raise ConfigError(f'exemplars_per_class must be >= 1, got {exemplars_per_class}')
    rng = resolve_rng(seed)
    labels = np.array(d.labels)
    chosen = {}
    for c in d.classes:
        members = np.flatnonzero(labels == c)
        if members.size == 0:
            raise DataError(f'class {c!r} has no records')
        take = min(exemplars_per_class, members.size)
        chosen[c] = np.sort(rng.choice(members, size=take, replace=False))
    return chosen


class RankEntry:
    def __init__(self, filter, score, per_class=None):
        self.filter = filter
        self.score = score
        # class -> M per exemplar
        self.per_class = per_class if per_class is not None else {}

    def to_dict(self):
        return {'filter': self.filter, 'score': self.score, 'm_threshold': self.per_class}


class FilterRanking:
    def __init__(self, entries, criterion):
        self.entries = entries
        self.criterion = criterion

    def names(self):
        return [e.filter for e in self.entries]

    def top(self, N):
        if N < 1 or N > len(self.entries):
            raise ConfigError(f'cannot pick {N} filters from a ranking of {len(self.entries)}')
        return self.names()[:N]

    def to_dict(self):
        return {'criterion': self.criterion, 'entries': [e.to_dict() for e in self.entries]}


def rank_filters(d, candidates, J0, exemplars_per_class=10, threshold=0.95, seed=0):
    '''
    Rank candidate filters by how few coefficients carry `threshold` of the exemplar energy.
    Score = mean M over all exemplars of all classes, lower is better; ties keep candidate order.
    '''
    if not 0.0 < threshold < 1.0:
        raise ConfigError(f'ranking threshold must lie strictly between 0 and 1, got {threshold}')
    names = []
    for c in candidates:
        name = filter_bank(c).name
        if name not in names:
            names.append(name)
    if not names:
        raise ConfigError('no candidate filters to rank')

    exemplars = sample_exemplars(d, exemplars_per_class, seed)
    entries = []
    for name in names:
        per_class = {}
        for c, idx in exemplars.items():
            coeffs = dwt(d.values[idx], name, J0).coefficients()
            per_class[c] = [int(m) for m in _m_threshold_rows(_npes_rows(coeffs), threshold)]
        pooled = [m for ms in per_class.values() for m in ms]
        entries.append(RankEntry(name, float(np.mean(pooled)), per_class))
        log.debug(f'{name}: mean M{threshold * 100:g} = {entries[-1].score:.3f}')

    entries = sorted(entries, key=lambda e: e.score)
    criterion = {'statistic': 'mean_m_threshold', 'threshold': threshold, 'J0': J0,
                 'exemplars_per_class': exemplars_per_class, 'seed': seed}
    log.info(f'Filter ranking (J0={J0}, threshold={threshold}): '
             + ', '.join(f'{e.filter}={e.score:.2f}' for e in entries))
    return FilterRanking(entries, criterion)


def class_curves(d, filters, J0, exemplars_per_class=10, seed=0):
    '''
    Mean NPES curve per class for the raw exemplars and for each filter's transform
    '''
    exemplars = sample_exemplars(d, exemplars_per_class, seed)
    curves = []
    for c, idx in exemplars.items():
        X = d.values[idx]
        curves.append(NpesCurve(_npes_rows(X).mean(axis=0), 'raw', c))
        for f in filters:
            name = filter_bank(f).name
            coeffs = dwt(X, name, J0).coefficients()
            curves.append(NpesCurve(_npes_rows(coeffs).mean(axis=0), f'{name}.J{J0}', c))
    return curves
