"""
Labeled fixed-length time series: UCR parsing, canonical CSV, merging, evaluation splits
and the first-difference smoothness statistic.
"""
import os

import numpy as np
import pandas as pd
from sklearn.model_selection import KFold, StratifiedKFold, train_test_split

from utils.logger import log
from utils.utils import save_frame
from wavefeat.common import DataError, ConfigError, canonical_classes


class TimeSeriesDataset:
    def __init__(self, labels, values, name=''):
        values = np.asarray(values, dtype=np.float64)
        if values.ndim != 2:
            raise DataError(f'values must be a K x n matrix, got shape {values.shape}')
        if values.shape[0] != len(labels):
            raise DataError(f'{len(labels)} labels for {values.shape[0]} series')
        if not np.all(np.isfinite(values)):
            raise DataError('series values must all be finite')
        values.setflags(write=False)
        self.labels = tuple(str(y) for y in labels)
        self.values = values  # K x n, float64
        self.name = name

    @property
    def K(self):
        return self.values.shape[0]

    @property
    def n(self):
        return self.values.shape[1]

    @property
    def class_domain(self):
        return frozenset(self.labels)

    @property
    def classes(self):
        """class domain in canonical order"""
        return canonical_classes(self.labels)

    def __len__(self):
        return self.K

    def records(self):
        return zip(self.labels, self.values)

    def subset(self, idx):
        idx = np.asarray(idx, dtype=np.int64)
        return TimeSeriesDataset(tuple(self.labels[i] for i in idx), self.values[idx], self.name)

    def class_counts(self):
        return {c: self.labels.count(c) for c in self.classes}


def _sniff_delimiter(line):
    if '\t' in line:
        return '\t'
    if ',' in line:
        return ','
    # older archive releases pad with spaces
    return None


def parse_ucr(path, delimiter=None, name=None):
    '''
    Parse a UCR-style file: one record per line, class label first, then n values.
    param delimiter: '\\t' or ','; None sniffs it from the first line (whitespace as a last resort)
    '''
    if not os.path.isfile(path):
        raise DataError(f'no such data file: {path}')
    with open(path, 'r') as f:
        lines = f.read().splitlines()

    rows = [(lineno, line) for lineno, line in enumerate(lines, start=1) if line.strip()]
    if not rows:
        raise DataError(f'{path}: empty file')
    if delimiter is None:
        delimiter = _sniff_delimiter(rows[0][1])

    labels, values = [], []
    n = None
    for lineno, line in rows:
        fields = [t.strip() for t in (line.split(delimiter) if delimiter else line.split())]
        if fields[0] == 'label' and not labels:  # canonical csv header
            continue
        if len(fields) < 2:
            raise DataError(f'{path}: line {lineno}: expected a label and at least one value')
        if n is None:
            n = len(fields) - 1
        elif len(fields) - 1 != n:
            raise DataError(f'{path}: line {lineno}: ragged row with {len(fields) - 1} values, expected {n}')
        row = np.empty(n)
        for pos, token in enumerate(fields[1:], start=1):
            try:
                row[pos - 1] = float(token)
            except ValueError:
                raise DataError(f'{path}: line {lineno}, field {pos + 1}: non-numeric value {token!r}') from None
        if not np.all(np.isfinite(row)):
            raise DataError(f'{path}: line {lineno}: non-finite value')
        labels.append(fields[0])
        values.append(row)
    if not labels:
        raise DataError(f'{path}: empty file')

    if name is None:
        name = os.path.splitext(os.path.basename(path))[0]
    d = TimeSeriesDataset(tuple(labels), np.vstack(values), name)
    log.debug(f'Parsed {path}: K={d.K}, n={d.n}, {len(d.class_domain)} classes')
    return d


def load_ucr(root, name, delimiter=None):
    '''
    Locate <name>_TRAIN / <name>_TEST (.tsv or .txt) under root or root/name and parse both
    '''
    for directory in (os.path.join(root, name), root):
        for ext in ('.tsv', '.txt', '.csv', ''):
            train = os.path.join(directory, f'{name}_TRAIN{ext}')
            test = os.path.join(directory, f'{name}_TEST{ext}')
            if os.path.isfile(train) and os.path.isfile(test):
                return (parse_ucr(train, delimiter, name=f'{name}_TRAIN'),
                        parse_ucr(test, delimiter, name=f'{name}_TEST'))
    raise DataError(f'UCR dataset {name} not found under {root}')


def to_frame(d):
    frame = pd.DataFrame(d.values, columns=[f'v{i}' for i in range(d.n)])
    frame.insert(0, 'label', list(d.labels))
    return frame


def write_csv(d, path):
    return save_frame(to_frame(d), path)


def merge(a, b):
    '''
    Concatenate two datasets, records of a first
    '''
    if b.K == 0:
        return a
    if a.K == 0:
        return b
    if a.n != b.n:
        raise DataError(f'cannot merge series of length {a.n} with series of length {b.n}')
    if a.class_domain != b.class_domain:
        log.warning(f'Merging datasets with different class domains: '
                    f'{sorted(a.class_domain - b.class_domain)} / {sorted(b.class_domain - a.class_domain)}')
    name = '+'.join(s for s in (a.name, b.name) if s)
    return TimeSeriesDataset(a.labels + b.labels, np.vstack([a.values, b.values]), name)


def empty(n=0):
    return TimeSeriesDataset((), np.zeros((0, n)))


def smoothness(x):
    '''
    Sample standard deviation (n-2 denominator) of the first differences of x
    '''
    x = np.asarray(x, dtype=np.float64)
    if x.ndim != 1 or x.size < 3:
        raise DataError(f'smoothness needs a series of at least 3 samples, got {x.size}')
    return float(np.std(np.diff(x), ddof=1))


def summarize(d):
    counts = d.class_counts()
    per_class = {}
    for c in d.classes:
        rows = d.values[np.array([y == c for y in d.labels])]
        per_class[c] = float(np.mean([smoothness(r) for r in rows]))
    return {
        'name': d.name,
        'K': d.K,
        'n': d.n,
        'n_classes': len(counts),
        'class_counts': counts,
        'smoothness_per_class': per_class,
        'smoothness': float(np.mean([smoothness(r) for r in d.values])),
    }


class SplitSpec:
    def __init__(self, mode, k=10, train_fraction=0.2, seed=0, stratified=True, train=None, test=None):
        self.mode = mode  # 'cv' | 'percentage' | 'fixed'
        self.k = k
        self.train_fraction = train_fraction
        self.seed = seed
        self.stratified = stratified
        self.train = train
        self.test = test

    @classmethod
    def cv(cls, k=10, seed=0, stratified=True):
        return cls('cv', k=k, seed=seed, stratified=stratified).validate()

    @classmethod
    def percentage(cls, train_fraction, seed=0, stratified=True):
        return cls('percentage', train_fraction=train_fraction, seed=seed, stratified=stratified).validate()

    @classmethod
    def fixed(cls, train, test):
        return cls('fixed', train=train, test=test).validate()

    @classmethod
    def parse(cls, text, seed=0, stratified=True, train=None, test=None):
        '''
        'cv:10' | 'split:0.2' | 'fixed'
        '''
        kind, _, arg = text.partition(':')
        if kind in ('cv', 'split'):
            try:
                number = int(arg or 10) if kind == 'cv' else float(arg or 0.2)
            except ValueError:
                raise ConfigError(f'bad evaluation protocol {text!r}') from None
            if kind == 'cv':
                return cls.cv(number, seed, stratified)
            return cls.percentage(number, seed, stratified)
        if kind == 'fixed':
            if train is None or test is None:
                raise ConfigError('fixed evaluation needs both a training and a test set')
            return cls.fixed(train, test)
        raise ConfigError(f'unknown evaluation protocol {text!r}; use cv:k, split:frac or fixed')

    def validate(self):
        if self.mode == 'cv':
            if self.k < 2:
                raise ConfigError(f'k-fold cross-validation needs k >= 2, got {self.k}')
        elif self.mode == 'percentage':
            if not 0.0 < self.train_fraction < 1.0:
                raise ConfigError(f'train fraction must lie in (0, 1), got {self.train_fraction}')
        elif self.mode == 'fixed':
            if self.train is None or self.test is None:
                raise ConfigError('fixed split needs train and test sets')
            if self.train.n != self.test.n:
                raise DataError(f'fixed train/test lengths differ: {self.train.n} vs {self.test.n}')
            if self.train.class_domain != self.test.class_domain:
                raise DataError('fixed train and test sets do not share a class domain')
        else:
            raise ConfigError(f'unknown split mode {self.mode!r}')
        return self

    def describe(self):
        if self.mode == 'cv':
            return {'mode': 'cv', 'k': self.k, 'seed': self.seed, 'stratified': self.stratified}
        if self.mode == 'percentage':
            return {'mode': 'percentage', 'train_fraction': self.train_fraction, 'seed': self.seed,
                    'stratified': self.stratified}
        return {'mode': 'fixed', 'train_K': self.train.K, 'test_K': self.test.K}


def split_indices(d, spec):
    '''
    list of (train_idx, test_idx) index arrays into d, each sorted ascending
    '''
    if spec.mode == 'cv':
        if d.K < spec.k:
            raise DataError(f'{spec.k}-fold cross-validation needs at least {spec.k} records, got {d.K}')
        idx = np.arange(d.K)
        if spec.stratified:
            smallest = min(d.class_counts().items(), key=lambda kv: kv[1])
            if smallest[1] < spec.k:
                raise DataError(f'class {smallest[0]!r} has {smallest[1]} records, fewer than k={spec.k}; '
                                f'use non-stratified folds (stratified=False / --stratified false)')
            folds = StratifiedKFold(n_splits=spec.k, shuffle=True, random_state=spec.seed)
            pairs = folds.split(idx, np.array(d.labels))
        else:
            folds = KFold(n_splits=spec.k, shuffle=True, random_state=spec.seed)
            pairs = folds.split(idx)
        return [(np.sort(tr), np.sort(te)) for tr, te in pairs]
    if spec.mode == 'percentage':
        idx = np.arange(d.K)
        try:
            tr, te = train_test_split(idx, train_size=spec.train_fraction, random_state=spec.seed,
                                      shuffle=True, stratify=np.array(d.labels) if spec.stratified else None)
        except ValueError as e:
            raise DataError(f'cannot make a stratified {spec.train_fraction:.0%} split: {e}') from None
        return [(np.sort(tr), np.sort(te))]
    raise ConfigError('fixed splits carry their own records; there are no indices to draw')


def make_splits(d, spec):
    '''
    list of (train, test) dataset pairs for the protocol in spec
    '''
    if spec.mode == 'fixed':
        return [(spec.train, spec.test)]
    pairs = [(d.subset(tr), d.subset(te)) for tr, te in split_indices(d, spec)]
    log.debug(f'{spec.mode} split of {d.K} records: test sizes {[te.K for _, te in pairs]}')
    return pairs
