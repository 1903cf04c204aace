import multiprocessing
import numbers

import numpy as np

default_params = \
    {
        # energy fraction used by the filter ranking (M95 at 0.95)
        "threshold": 0.95,
        # records sampled per class for the ranking, capped by the class size
        "exemplars_per_class": 10,
        # ensemble size, no tuning
        "trees": 100,
        # smallest leaf a split may produce
        "min_leaf": 2,
        # decomposition level J0
        "level": 1,
        # append the untransformed odd-length samples after each smooth block
        "extras": True,
        "seed": 0,
        # stratify folds and percentage splits by class
        "stratified": True,
        # None -> sniff tab or comma from the first line
        "delimiter": None,
        # do we use several cores?
        "parallel": False,
        "num_workers": 1,
    }


class WavefeatError(Exception):
    pass


class DataError(WavefeatError, ValueError):
    pass


class InfeasibleTransformError(WavefeatError, ValueError):
    pass


class ConfigError(WavefeatError, ValueError):
    pass


def _label_key(label):
    # numerically equal labels ('1', '1.0') fall back to their text
    return float(label), label


def canonical_classes(labels):
    '''
    Sorted distinct labels. Numeric-looking labels sort by value ('2' < '10'),
    anything else sorts as text.
    '''
    distinct = set(labels)
    try:
        return sorted(distinct, key=_label_key)
    except (TypeError, ValueError):
        return sorted(distinct, key=str)


def label_index(labels, classes):
    lookup = {c: i for i, c in enumerate(classes)}
    return np.array([lookup[y] for y in labels], dtype=np.int64)


def resolve_rng(seed):
    if isinstance(seed, np.random.Generator):
        return seed
    if seed is None or isinstance(seed, numbers.Integral):
        return np.random.default_rng(seed)
    return np.random.default_rng(list(seed))


def make_pool(num_workers):
    '''
    returns None for serial execution, otherwise a process pool
    param num_workers: -1 means use all cores
    '''
    if num_workers == -1:
        num_workers = multiprocessing.cpu_count()
    if num_workers <= 1:
        return None
    return multiprocessing.Pool(num_workers)


def parallel_eval(evaluate_function, to_evaluate, pool, params):
    if params['parallel'] and pool is not None:
        s_list = pool.map(evaluate_function, to_evaluate)
    else:
        s_list = map(evaluate_function, to_evaluate)
    return list(s_list)
