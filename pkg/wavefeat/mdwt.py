"""
Multiple-DWT feature matrices: per record, the level-J0 smooth coefficients of N filters
laid side by side (optionally followed by each filter's extras, or preceded by its details
for the full-transform baseline).
"""
import numpy as np
import pandas as pd

from utils.logger import log
from wavefeat.common import ConfigError, DataError, InfeasibleTransformError
from wavefeat.wavelet import dwt, filter_bank, level_sizes, _check_level


class MdwtConfig:
    def __init__(self, filters, J0, include_extras=False, include_details=False):
        if isinstance(filters, str):
            filters = (filters,)
        self.filters = tuple(filter_bank(f).name for f in filters)
        if not self.filters:
            raise ConfigError('MDWT needs at least one filter')
        if J0 < 1:
            raise ConfigError(f'decomposition level must be >= 1, got {J0}')
        self.J0 = J0
        self.include_extras = include_extras
        self.include_details = include_details

    def describe(self):
        return {'filters': list(self.filters), 'J0': self.J0,
                'include_extras': self.include_extras, 'include_details': self.include_details}


class FeatureMatrix:
    def __init__(self, values, labels, provenance, n, config):
        self.values = values  # K x A
        self.labels = labels
        self.provenance = provenance  # (filter, level tag, index) per column
        self.n = n  # original series length
        self.config = config

    @property
    def K(self):
        return self.values.shape[0]

    @property
    def A(self):
        return self.values.shape[1]

    @property
    def compression_ratio(self):
        return self.A / self.n

    def header(self):
        names = []
        for source, tag, k in self.provenance:
            if source == 'raw':
                names.append(f'v{k}')
            elif tag.startswith('extra'):
                names.append(f'{source}.{tag}')
            else:
                names.append(f'{source}.{tag}.{k}')
        return names

    def subset(self, idx):
        idx = np.asarray(idx, dtype=np.int64)
        return FeatureMatrix(self.values[idx], tuple(self.labels[i] for i in idx),
                             self.provenance, self.n, self.config)

    def to_frame(self):
        frame = pd.DataFrame(self.values, columns=self.header())
        frame['label'] = list(self.labels)
        return frame


def _filter_block(dec, cfg):
    # one filter's columns: [details], smooth, [extras]
    blocks, provenance = [], []
    name, J0 = dec.filter, cfg.J0
    if cfg.include_details:
        for j, w in enumerate(dec.details, start=1):
            blocks.append(w)
            provenance += [(name, f'd{j}', k) for k in range(w.shape[-1])]
    blocks.append(dec.smooth)
    provenance += [(name, f's{J0}', k) for k in range(dec.smooth.shape[-1])]
    if cfg.include_extras:
        blocks.append(dec.extras_through(J0))
        provenance += [(name, f'extra.L{lvl}', 0) for lvl in dec.extra_levels]
    return blocks, provenance


def build_features(d, cfg):
    '''
    Row i = concatenation over cfg.filters of the level-J0 smooth block of record i
    '''
    blocks, provenance = [], []
    for name in cfg.filters:
        dec = dwt(d.values, name, cfg.J0)
        b, p = _filter_block(dec, cfg)
        blocks += b
        provenance += p
    values = np.concatenate(blocks, axis=1) if d.K else np.zeros((0, len(provenance)))
    assert values.shape[1] == len(provenance), 'feature width does not match provenance'
    fm = FeatureMatrix(values, d.labels, tuple(provenance), d.n, {'kind': 'mdwt', **cfg.describe()})
    log.debug(f'MDWT {"+".join(cfg.filters)} J0={cfg.J0}: width {fm.A} from n={d.n}')
    return fm


def raw_features(d):
    provenance = tuple(('raw', 'x', k) for k in range(d.n))
    return FeatureMatrix(np.array(d.values), d.labels, provenance, d.n, {'kind': 'raw'})


def full_transform_features(d, f, J0):
    '''
    every detail and smooth coefficient of one filter; extras left out
    '''
    cfg = MdwtConfig((f,), J0, include_extras=False, include_details=True)
    fm = build_features(d, cfg)
    return FeatureMatrix(fm.values, fm.labels, fm.provenance, fm.n, {'kind': 'full', **cfg.describe()})


def feature_width(n, cfg):
    '''
    closed-form width of build_features for series of length n
    '''
    _check_level(n, cfg.J0)
    sizes = level_sizes(n, cfg.J0)
    per_filter = sizes[-1][2]
    if cfg.include_details:
        per_filter += sum(half for _, _, half in sizes)
    if cfg.include_extras:
        per_filter += sum(1 for _, extra, _ in sizes if extra)
    return per_filter * len(cfg.filters)


def extra_energy_share(d, f, J0):
    '''
    mean over records of the percentage of signal energy held by the extras at level J0
    '''
    total = (d.values ** 2).sum(axis=1)
    if np.any(total <= 0.0):
        raise DataError('extra energy share is undefined for all-zero series')
    dec = dwt(d.values, f, J0)
    return float(np.mean(dec.extra_energy() / total) * 100.0)


class Featurizer:
    '''
    Feature configuration shared by the CLI and the evaluation harness.
    text form: raw | full:<filter>:<J0> | smooth:<f1>+<f2>+...:<J0>[:extras]
    '''
    def __init__(self, kind, mdwt=None):
        self.kind = kind
        self.mdwt = mdwt

    @classmethod
    def parse(cls, text):
        parts = text.strip().split(':')
        kind = parts[0]
        if kind == 'raw' and len(parts) == 1:
            return cls('raw')
        try:
            if kind == 'full' and len(parts) == 3:
                return cls('full', MdwtConfig((parts[1],), int(parts[2]), False, True))
            if kind == 'smooth' and len(parts) in (3, 4):
                if len(parts) == 4 and parts[3] != 'extras':
                    raise ConfigError(f'unknown smooth option {parts[3]!r}')
                return cls('smooth', MdwtConfig(tuple(parts[1].split('+')), int(parts[2]), len(parts) == 4))
        except InfeasibleTransformError:
            raise
        except ValueError as e:
            raise ConfigError(f'bad feature spec {text!r}: {e}') from None
        raise ConfigError(f'bad feature spec {text!r}; use raw, full:<filter>:<J0> '
                          f'or smooth:<f1>+<f2>:<J0>[:extras]')

    def __call__(self, d):
        if self.kind == 'raw':
            return raw_features(d)
        if self.kind == 'full':
            return full_transform_features(d, self.mdwt.filters[0], self.mdwt.J0)
        return build_features(d, self.mdwt)

    def describe(self):
        if self.kind == 'raw':
            return {'kind': 'raw'}
        return {'kind': self.kind, **self.mdwt.describe()}

    def __str__(self):
        if self.kind == 'raw':
            return 'raw'
        if self.kind == 'full':
            return f'full:{self.mdwt.filters[0]}:{self.mdwt.J0}'
        suffix = ':extras' if self.mdwt.include_extras else ''
        return f'smooth:{"+".join(self.mdwt.filters)}:{self.mdwt.J0}{suffix}'
