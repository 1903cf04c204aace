"""
Orthonormal DWT by the pyramid algorithm with periodic boundaries.

At each level the current smooth vector is split into detail and smooth halves. When its
length is odd, the final sample is detached first and kept untransformed as an "extra"
coefficient for that level; synthesis puts it back in the same place. Dyadic lengths never
produce extras.

All transforms act on the last axis, so a K x n matrix of records is decomposed in one call.
"""
from functools import lru_cache

import numpy as np
import pywt

from utils.logger import log
from wavefeat.common import InfeasibleTransformError, DataError

# our name -> PyWavelets name. d<L> are Daubechies extremal phase, la<L> least asymmetric
_PYWT_NAMES = {
    'haar': 'haar',
    'd4': 'db2',
    'd6': 'db3',
    'd8': 'db4',
    'd10': 'db5',
    'd12': 'db6',
    'd14': 'db7',
    'd16': 'db8',
    'd18': 'db9',
    'd20': 'db10',
    'la8': 'sym4',
    'la10': 'sym5',
    'la12': 'sym6',
    'la14': 'sym7',
    'la16': 'sym8',
    'la18': 'sym9',
    'la20': 'sym10',
}
# s<L> is how some tooling labels the least asymmetric filters
_ALIASES = {'d2': 'haar', 's8': 'la8', 's16': 'la16', 's20': 'la20'}

SUPPORTED_FILTERS = tuple(_PYWT_NAMES)


class WaveletFilter:
    def __init__(self, name, scaling, wavelet):
        self.name = name
        self.scaling = scaling  # g, low-pass
        self.wavelet = wavelet  # h, high-pass

    @property
    def L(self):
        return self.scaling.size

    def check(self):
        g, h, L = self.scaling, self.wavelet, self.L
        problems = []
        if L % 2:
            problems.append(f'odd length {L}')
        if abs(g.sum() - np.sqrt(2.0)) > 1e-12:
            problems.append(f'sum(g) = {g.sum()!r}, expected sqrt(2)')
        if abs((g ** 2).sum() - 1.0) > 1e-12:
            problems.append(f'sum(g^2) = {(g ** 2).sum()!r}, expected 1')
        for m in range(1, L // 2):
            if abs(np.dot(g[:L - 2 * m], g[2 * m:])) > 1e-10:
                problems.append(f'even-shift {2 * m} not orthogonal')
        if not np.array_equal(h, _quadrature_mirror(g)):
            problems.append('wavelet filter is not the quadrature mirror of the scaling filter')
        if abs(h.sum()) > 1e-12:
            problems.append(f'sum(h) = {h.sum()!r}, expected 0')
        if problems:
            raise ValueError(f'filter {self.name}: ' + '; '.join(problems))
        return self


def _quadrature_mirror(g):
    L = g.size
    signs = np.where(np.arange(L) % 2 == 0, 1.0, -1.0)
    return signs * g[::-1]


def filter_residuals(g):
    '''
    Defining equations of a Daubechies scaling filter of even length L, all zero for an exact filter:
    sum_k g_k g_{k+2m} - [m == 0] for m < L/2, then the L/2 vanishing moments of its wavelet filter
    '''
    g = np.asarray(g, dtype=np.float64)
    L = g.size
    auto = np.array([np.dot(g[:L - s], g[s:]) for s in range(0, L, 2)])
    auto[0] -= 1.0
    return np.concatenate([auto, _moment_rows(L) @ g])


@lru_cache(maxsize=None)
def _moment_rows(L):
    # sum_k (-1)^k t_k^p g_k with t centred on the filter, each row scaled to unit max
    k = np.arange(L)
    t = k - (L - 1) / 2.0
    rows = np.vstack([t ** p for p in range(L // 2)])
    rows /= np.abs(rows).max(axis=1, keepdims=True)
    rows *= np.where(k % 2 == 0, 1.0, -1.0)
    rows.setflags(write=False)
    return rows


def _residual_jacobian(g):
    L = g.size
    k = np.arange(L)
    padded = np.concatenate([np.zeros(L), g, np.zeros(L)])
    auto = [padded[L + k + s] + padded[L + k - s] for s in range(0, L, 2)]
    return np.vstack(auto + [_moment_rows(L)])


def polish(g, steps=5):
    '''
    Newton steps on filter_residuals from tabulated constants to the nearby exact filter.
    The PyWavelets sym* tables only carry about 12 significant digits.
    '''
    best = np.asarray(g, dtype=np.float64)
    best_err = np.abs(filter_residuals(best)).max()
    for _ in range(steps):
        step = np.linalg.lstsq(_residual_jacobian(best), filter_residuals(best), rcond=None)[0]
        candidate = best - step
        err = np.abs(filter_residuals(candidate)).max()
        if not err < best_err:
            break
        best, best_err = candidate, err
    return best


def canonical_name(name):
    key = str(name).strip().lower()
    return _ALIASES.get(key, key)


@lru_cache(maxsize=None)
def _filter_bank(name):
    g = polish(pywt.Wavelet(_PYWT_NAMES[name]).rec_lo)
    g.setflags(write=False)
    h = _quadrature_mirror(g)
    h.setflags(write=False)
    return WaveletFilter(name, g, h).check()


def filter_bank(name):
    '''
    Scaling/wavelet filter pair for a supported name (d4..d20, la8..la20, haar)
    '''
    if isinstance(name, WaveletFilter):
        return name
    key = canonical_name(name)
    if key not in _PYWT_NAMES:
        raise InfeasibleTransformError(f'unknown wavelet filter {name!r}; supported: {", ".join(SUPPORTED_FILTERS)}')
    return _filter_bank(key)


def level_sizes(n, J0):
    '''
    Per-level bookkeeping of the pyramid for length n:
    list of (input length, has extra, coefficient count per half), one entry per level
    '''
    sizes = []
    M = n
    for _ in range(J0):
        extra = M % 2 == 1
        even = M - 1 if extra else M
        if even < 2:
            break
        sizes.append((M, extra, even // 2))
        M = even // 2
    return sizes


def max_level(n):
    '''
    deepest feasible J0: every level needs an even part of at least 2 samples
    '''
    level = 0
    M = n
    while True:
        even = M - (M % 2)
        if even < 2:
            return level
        level += 1
        M = even // 2


def _check_level(n, J0):
    if J0 < 1:
        raise InfeasibleTransformError(f'decomposition level must be >= 1, got {J0}')
    deepest = max_level(n)
    if J0 > deepest:
        raise InfeasibleTransformError(f'level {J0} is too deep for series of length {n}; '
                                       f'maximum feasible level is {deepest}')


@lru_cache(maxsize=256)
def _analysis_index(M, L):
    # row t gathers V[(2t + 1 - l) mod M] for l = 0..L-1
    t = np.arange(M // 2)[:, None]
    l = np.arange(L)[None, :]
    idx = (2 * t + 1 - l) % M
    idx.setflags(write=False)
    return idx


@lru_cache(maxsize=256)
def _synthesis_index(M, L):
    # row t gathers the upsampled coefficient at (t + l) mod M
    t = np.arange(M)[:, None]
    l = np.arange(L)[None, :]
    idx = (t + l) % M
    idx.setflags(write=False)
    return idx


@lru_cache(maxsize=None)
def _warn_wrap(name, M, L):
    log.warning(f"{name}: level input of {M} samples is shorter than the filter (L={L}); the periodic filter wraps")


def _analysis_step(V, f):
    M = V.shape[-1]
    if M < f.L:
        _warn_wrap(f.name, M, f.L)
    gathered = V[..., _analysis_index(M, f.L)]
    return gathered @ f.wavelet, gathered @ f.scaling


def _synthesis_step(W, V, f):
    M = 2 * W.shape[-1]
    W_up = np.zeros(W.shape[:-1] + (M,))
    V_up = np.zeros(V.shape[:-1] + (M,))
    W_up[..., 1::2] = W
    V_up[..., 1::2] = V
    idx = _synthesis_index(M, f.L)
    return W_up[..., idx] @ f.wavelet + V_up[..., idx] @ f.scaling


class Decomposition:
    def __init__(self, filter, J0, details, smooth, extra_levels, extra_values, original_n):
        self.filter = filter
        self.J0 = J0
        self.details = details  # W_1..W_J0
        self.smooth = smooth  # V_J0
        self.extra_levels = extra_levels  # level at which each extra was detached
        self.extra_values = extra_values  # untransformed samples, last axis aligned with extra_levels
        self.original_n = original_n

    @property
    def extras(self):
        if self.extra_values.ndim != 1:
            raise ValueError('extras as (level, value) pairs are defined for a single record')
        return [(lvl, float(v)) for lvl, v in zip(self.extra_levels, self.extra_values)]

    def coefficient_count(self):
        return sum(w.shape[-1] for w in self.details) + self.smooth.shape[-1] + len(self.extra_levels)

    def coefficients(self):
        '''
        W_1, ..., W_J0, V_J0, extras concatenated along the last axis
        '''
        return np.concatenate(list(self.details) + [self.smooth, self.extra_values], axis=-1)

    def energy(self):
        return (self.coefficients() ** 2).sum(axis=-1)

    def extra_energy(self):
        return (self.extra_values ** 2).sum(axis=-1)

    def extras_through(self, level):
        '''
        extra values detached at levels <= level, ordered by level
        '''
        keep = [i for i, lvl in enumerate(self.extra_levels) if lvl <= level]
        return self.extra_values[..., keep]

    def check(self):
        sizes = level_sizes(self.original_n, self.J0)
        if len(sizes) != self.J0 or len(self.details) != self.J0:
            raise DataError(f'decomposition of length {self.original_n} cannot hold {len(self.details)} levels')
        for j, (w, (_, _, half)) in enumerate(zip(self.details, sizes), start=1):
            if w.shape[-1] != half:
                raise DataError(f'level {j} details have {w.shape[-1]} coefficients, expected {half}')
        if self.smooth.shape[-1] != sizes[-1][2]:
            raise DataError(f'smooth has {self.smooth.shape[-1]} coefficients, expected {sizes[-1][2]}')
        expected_levels = tuple(j for j, (_, extra, _) in enumerate(sizes, start=1) if extra)
        if tuple(self.extra_levels) != expected_levels or self.extra_values.shape[-1] != len(expected_levels):
            raise DataError(f'extras at levels {tuple(self.extra_levels)}, expected {expected_levels}')
        return self

    def replace(self, details=None, smooth=None, extra_values=None):
        return Decomposition(self.filter, self.J0,
                             tuple(details) if details is not None else self.details,
                             smooth if smooth is not None else self.smooth,
                             self.extra_levels,
                             extra_values if extra_values is not None else self.extra_values,
                             self.original_n)

    def to_dict(self):
        return {
            'filter': self.filter,
            'J0': self.J0,
            'original_n': self.original_n,
            'details': [w.tolist() for w in self.details],
            'smooth': self.smooth.tolist(),
            'extras': [[lvl, v] for lvl, v in zip(self.extra_levels, self.extra_values.tolist())],
        }

    @classmethod
    def from_dict(cls, d):
        extras = d.get('extras', [])
        return cls(d['filter'], int(d['J0']),
                   tuple(np.asarray(w, dtype=np.float64) for w in d['details']),
                   np.asarray(d['smooth'], dtype=np.float64),
                   tuple(int(lvl) for lvl, _ in extras),
                   np.asarray([v for _, v in extras], dtype=np.float64),
                   int(d['original_n'])).check()


def dwt(x, f, J0):
    '''
    Pyramid analysis of x (one series, or K series as rows) to level J0
    param f: WaveletFilter or filter name
    '''
    f = filter_bank(f)
    V = np.asarray(x, dtype=np.float64)
    n = V.shape[-1]
    _check_level(n, J0)

    details, extra_levels, extra_values = [], [], []
    for j in range(1, J0 + 1):
        if V.shape[-1] % 2:
            extra_levels.append(j)
            extra_values.append(V[..., -1])
            V = V[..., :-1]
        W, V = _analysis_step(V, f)
        details.append(W)

    if extra_values:
        extras = np.stack(extra_values, axis=-1)
    else:
        extras = np.zeros(V.shape[:-1] + (0,))
    return Decomposition(f.name, J0, tuple(details), V, tuple(extra_levels), extras, n)


def idwt(d):
    '''
    Synthesis: exact inverse of dwt, extras reinserted where they were detached
    '''
    d.check()
    f = filter_bank(d.filter)
    extra_at = {lvl: i for i, lvl in enumerate(d.extra_levels)}
    V = d.smooth
    for j in range(d.J0, 0, -1):
        V = _synthesis_step(d.details[j - 1], V, f)
        if j in extra_at:
            V = np.concatenate([V, d.extra_values[..., extra_at[j]:extra_at[j] + 1]], axis=-1)
    return V


def mra(d):
    '''
    Additive decomposition: [D_1, ..., D_J0, S_J0], each of the original length, summing to x.
    Extras are carried by the smooth S_J0.
    '''
    zero_details = [np.zeros_like(w) for w in d.details]
    series = []
    for j in range(d.J0):
        only_j = list(zero_details)
        only_j[j] = d.details[j]
        series.append(idwt(d.replace(details=only_j, smooth=np.zeros_like(d.smooth),
                                     extra_values=np.zeros_like(d.extra_values))))
    series.append(idwt(d.replace(details=zero_details)))
    return series
