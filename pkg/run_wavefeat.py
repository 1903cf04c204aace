import argparse
import os
import sys

import pandas as pd

from utils.logger import log, add_file_handler
from utils.utils import cfg_dict, config_hash, dumps, save_cfg, save_frame, save_json
from wavefeat import __version__
from wavefeat.common import (ConfigError, DataError, InfeasibleTransformError, default_params, make_pool)
from wavefeat.energy import class_curves, rank_filters
from wavefeat.evaluate import evaluate, results_table
from wavefeat.forest import ClassifierConfig
from wavefeat.ingest import SplitSpec, merge, parse_ucr, summarize
from wavefeat.mdwt import Featurizer, MdwtConfig, build_features, feature_width

CANDIDATE_FILTERS = 'd4,d8,d12,d16,la8,la16,la20'
EXIT_USAGE, EXIT_DATA, EXIT_INFEASIBLE = 2, 3, 4


# CLI args
def str2bool(v):
    if isinstance(v, bool):
        return v
    if isinstance(v, str) and v.lower() in ('true', ):
        return True
    elif isinstance(v, str) and v.lower() in ('false', ):
        return False
    else:
        raise argparse.ArgumentTypeError('Boolean value expected')


def csv_list(v):
    return [s.strip() for s in v.split(',') if s.strip()]


_DELIMITERS = {'\\t': '\t', 'tab': '\t', 'comma': ','}


def delimiter(v):
    '''
    shell-friendly names: '\\t' or tab, comma
    '''
    return _DELIMITERS.get(v.lower(), v)


def _add_data_args(p):
    p.add_argument('--data', required=True, type=str, help='UCR-style data file (label first, then the series)')
    p.add_argument('--merge-with', dest='merge_with', default=None, type=str, help='second file appended to --data, e.g. the _TEST half')
    p.add_argument('--delimiter', default=default_params['delimiter'], type=delimiter, help='field delimiter (tab, comma or a literal character); sniffed from the first line if omitted')
    p.add_argument('--seed', default=None, type=int, help='seed (default: $WAVEFEAT_SEED, else 0)')
    p.add_argument('--out', default='./results', type=str, help='directory for reports, curves and cfg.json')
    p.add_argument('--num-workers', dest='num_workers', default=1, type=int, help='# of cores used to train forests. -1 means use all cores')


def _add_transform_args(p, filters_default):
    p.add_argument('--filters', default=filters_default, type=csv_list, help='comma separated wavelet filters, e.g. la16,d12')
    p.add_argument('--level', default=default_params['level'], type=int, help='decomposition level J0')
    p.add_argument('--extras', dest='extras', action='store_true', help='append the odd-length extra coefficients')
    p.add_argument('--no-extras', dest='extras', action='store_false', help='drop the odd-length extra coefficients')
    p.set_defaults(extras=default_params['extras'])


def _add_ranking_args(p):
    p.add_argument('--threshold', default=default_params['threshold'], type=float, help='energy fraction for the M statistic (0.95 -> M95)')
    p.add_argument('--exemplars', default=default_params['exemplars_per_class'], type=int, help='exemplars sampled per class')


def _add_classifier_args(p):
    p.add_argument('--classifier', default='rforest', type=str, help='j48, cart or rforest')
    p.add_argument('--trees', default=default_params['trees'], type=int, help='forest size T')
    p.add_argument('--mtry', default=None, type=int, help='columns sampled per split (default floor(sqrt(A)))')
    p.add_argument('--min-leaf', dest='min_leaf', default=None, type=int, help='smallest leaf a split may produce')
    p.add_argument('--max-depth', dest='max_depth', default=None, type=int, help='depth cap (default none)')
    p.add_argument('--no-bootstrap', dest='bootstrap', action='store_false', help='grow forest trees on the full training set')
    p.add_argument('--prune-fraction', dest='prune_fraction', default=0.0, type=float, help='cart: share of training records held out for reduced-error pruning')
    p.add_argument('--mdl-correction', dest='mdl_correction', default=False, type=str2bool, help='j48: charge log2(#distinct - 1)/N for choosing a threshold')


def _add_eval_args(p):
    p.add_argument('--eval', default='cv:10', type=str, help='cv:k, split:frac or fixed')
    p.add_argument('--test', default=None, type=str, help='test file for --eval fixed')
    p.add_argument('--stratified', default=default_params['stratified'], type=str2bool, help='stratify folds and splits by class')


def parse_args(argv=None):
    parser = argparse.ArgumentParser(prog='run_wavefeat', description='wavelet smooth-coefficient features for time series classification')
    sub = parser.add_subparsers(dest='command', required=True)

    p = sub.add_parser('info', help='dataset summary')
    _add_data_args(p)
    p.set_defaults(func=cmd_info)

    p = sub.add_parser('npes', help='NPES curves and the filter ranking')
    _add_data_args(p)
    _add_transform_args(p, csv_list(CANDIDATE_FILTERS))
    _add_ranking_args(p)
    p.set_defaults(func=cmd_npes)

    p = sub.add_parser('transform', help='write the MDWT feature matrix')
    _add_data_args(p)
    _add_transform_args(p, ['la16'])
    p.set_defaults(func=cmd_transform)

    p = sub.add_parser('evaluate', help='train and score one classifier')
    _add_data_args(p)
    _add_transform_args(p, None)
    p.add_argument('--features', default=None, type=str, help='raw | full:<f>:<J0> | smooth:<f1>+<f2>:<J0>[:extras]; overrides --filters')
    _add_classifier_args(p)
    _add_eval_args(p)
    p.set_defaults(func=cmd_evaluate)

    p = sub.add_parser('pipeline', help='rank filters, keep the top N, transform and evaluate')
    _add_data_args(p)
    _add_transform_args(p, csv_list(CANDIDATE_FILTERS))
    _add_ranking_args(p)
    p.add_argument('--top', default=2, type=int, help='number of best ranked filters combined')
    _add_classifier_args(p)
    _add_eval_args(p)
    p.set_defaults(func=cmd_pipeline)

    p = sub.add_parser('table', help='accuracy of several classifiers on several feature sets')
    _add_data_args(p)
    p.add_argument('--columns', default=['raw'], type=csv_list, help='comma separated feature configurations')
    p.add_argument('--classifiers', default=['j48', 'cart', 'rforest'], type=csv_list, help='comma separated classifier names')
    p.add_argument('--trees', default=default_params['trees'], type=int, help='forest size T')
    _add_eval_args(p)
    p.set_defaults(func=cmd_table)

    args = parser.parse_args(argv)
    return args


def resolve_seed(cfg):
    if cfg.get('seed') is not None:
        return cfg['seed']
    env = os.environ.get('WAVEFEAT_SEED')
    if env is None:
        return default_params['seed']
    try:
        return int(env)
    except ValueError:
        raise ConfigError(f'WAVEFEAT_SEED must be an integer, got {env!r}') from None


def load_data(cfg):
    d = parse_ucr(cfg['data'], cfg['delimiter'])
    if cfg.get('merge_with'):
        d = merge(d, parse_ucr(cfg['merge_with'], cfg['delimiter']))
    return d


def split_spec(cfg, d):
    test = None
    if cfg['eval'].startswith('fixed'):
        if not cfg.get('test'):
            raise ConfigError('--eval fixed needs --test')
        test = parse_ucr(cfg['test'], cfg['delimiter'])
    return SplitSpec.parse(cfg['eval'], seed=cfg['seed'], stratified=cfg['stratified'], train=d, test=test)


def classifier_config(cfg, name=None):
    params = {'T': cfg['trees'], 'mtry': cfg.get('mtry'), 'max_depth': cfg.get('max_depth'),
              'bootstrap': cfg.get('bootstrap', True), 'prune_fraction': cfg.get('prune_fraction', 0.0),
              'mdl_correction': cfg.get('mdl_correction', False)}
    if cfg.get('min_leaf') is not None:
        params['min_leaf'] = cfg['min_leaf']
    name = name or cfg['classifier']
    if name != 'rforest':
        params = {k: v for k, v in params.items() if k not in ('T', 'mtry', 'bootstrap')}
    return ClassifierConfig(name, params)


def featurizer(cfg):
    if cfg.get('features'):
        return Featurizer.parse(cfg['features'])
    if not cfg.get('filters'):
        return Featurizer('raw')
    return Featurizer('smooth', MdwtConfig(tuple(cfg['filters']), cfg['level'], cfg['extras']))


def stamp(cfg):
    return {'seed': cfg['seed'], 'config_hash': config_hash(cfg), 'version': __version__}


def cmd_info(cfg, pool=None):
    summary = summarize(load_data(cfg))
    print(dumps(summary))
    save_json(summary, os.path.join(cfg['out'], 'info.json'))
    return summary


def cmd_npes(cfg, pool=None):
    d = load_data(cfg)
    ranking = rank_filters(d, cfg['filters'], cfg['level'], cfg['exemplars'], cfg['threshold'], cfg['seed'])
    for curve in class_curves(d, ranking.names(), cfg['level'], cfg['exemplars'], cfg['seed']):
        save_frame(curve.to_frame(), os.path.join(cfg['out'], f'npes_{curve.class_label}_{curve.source}.csv'))
    save_json({**ranking.to_dict(), **stamp(cfg)}, os.path.join(cfg['out'], 'ranking.json'))
    return ranking


def cmd_transform(cfg, pool=None):
    d = load_data(cfg)
    fm = build_features(d, MdwtConfig(tuple(cfg['filters']), cfg['level'], cfg['extras']))
    save_frame(fm.to_frame(), os.path.join(cfg['out'], 'features.csv'))
    meta = {'dataset': d.name, 'K': fm.K, 'n': fm.n, 'width': fm.A, 'compression_ratio': fm.compression_ratio,
            'features': fm.config, **stamp(cfg)}
    save_json(meta, os.path.join(cfg['out'], 'transform.json'))
    log.info(f'Feature matrix {fm.K} x {fm.A} written (compression ratio {fm.compression_ratio:.3f})')
    return fm


def _save_report(report, cfg, name='report'):
    report.config_hash = config_hash(cfg)
    save_json(report.to_dict(), os.path.join(cfg['out'], f'{name}.json'))
    save_frame(pd.DataFrame([report.to_row()]), os.path.join(cfg['out'], f'{name}.csv'))


def cmd_evaluate(cfg, pool=None):
    d = load_data(cfg)
    report = evaluate(d, featurizer(cfg), classifier_config(cfg), split_spec(cfg, d), cfg['seed'], pool)
    _save_report(report, cfg)
    return report


def cmd_pipeline(cfg, pool=None):
    d = load_data(cfg)
    spec = split_spec(cfg, d)
    ranking = rank_filters(d, cfg['filters'], cfg['level'], cfg['exemplars'], cfg['threshold'], cfg['seed'])
    chosen = ranking.top(cfg['top'])
    mdwt = MdwtConfig(tuple(chosen), cfg['level'], cfg['extras'])
    widths = {f: feature_width(d.n, MdwtConfig((f,), cfg['level'], cfg['extras'])) for f in chosen}
    report = evaluate(d, Featurizer('smooth', mdwt), classifier_config(cfg), spec, cfg['seed'], pool)
    report.config_hash = config_hash(cfg)
    width = feature_width(d.n, mdwt)
    assert width == report.width, 'evaluated width differs from the closed form'
    result = {'ranking': ranking.to_dict(), 'chosen': chosen, 'widths': widths, 'width': width, 'n': d.n,
              'compression_ratio': width / d.n, 'evaluation': report.to_dict(), **stamp(cfg)}
    save_json(result, os.path.join(cfg['out'], 'pipeline.json'))
    log.info(f'Pipeline chose {"+".join(chosen)}: width {width} of {d.n}, accuracy {report.accuracy_percent:.2f}%')
    return result


def cmd_table(cfg, pool=None):
    d = load_data(cfg)
    spec = split_spec(cfg, d)
    classifiers = [classifier_config(cfg, name) for name in cfg['classifiers']]
    frame, reports = results_table(d, cfg['columns'], classifiers, spec, cfg['seed'], pool)
    save_frame(frame, os.path.join(cfg['out'], 'table.csv'), index=True)
    for report in reports:
        report.config_hash = config_hash(cfg)
    save_json({'reports': [r.to_dict() for r in reports], **stamp(cfg)}, os.path.join(cfg['out'], 'table.json'))
    log.info(f'Results table\n{frame.to_string()}')
    return frame


def main(argv=None):
    args = parse_args(argv)
    cfg = cfg_dict(args)
    pool = None
    try:
        cfg['seed'] = resolve_seed(cfg)
        os.makedirs(cfg['out'], exist_ok=True)
        add_file_handler(cfg['out'])

        log.debug(f'############## PARAMETERS #########################')
        for key, val in cfg.items():
            if key != 'func':
                log.debug(f'{key}: {val}')
        log.debug('#' * 50)
        save_cfg(cfg, cfg['out'])

        pool = make_pool(cfg['num_workers'])
        cfg['func'](cfg, pool)
    except ConfigError as e:
        log.error(f'{e}')
        return EXIT_USAGE
    except InfeasibleTransformError as e:
        log.error(f'{e}')
        return EXIT_INFEASIBLE
    except DataError as e:
        log.error(f'{e}')
        return EXIT_DATA
    finally:
        if pool is not None:
            pool.close()
            pool.join()
    return 0


if __name__ == '__main__':
    sys.exit(main())
