"""
Accuracy reports under the three evaluation protocols (k-fold CV, percentage split, fixed
train/test files) and the classifier x feature-configuration results table.
"""
import numpy as np
import pandas as pd

from utils.logger import log
from wavefeat import __version__
from wavefeat.common import canonical_classes
from wavefeat.forest import ClassifierConfig
from wavefeat.ingest import make_splits
from wavefeat.mdwt import Featurizer


class EvalReport:
    def __init__(self, protocol, classes, confusion, fold_accuracies, fold_sizes, model_stats, seed, features,
                 classifier, width, n, dataset='', config_hash=None, version=__version__):
        self.protocol = protocol
        self.classes = classes
        self.confusion = confusion  # rows: true class, columns: predicted class
        self.fold_accuracies = fold_accuracies
        self.fold_sizes = fold_sizes
        self.model_stats = model_stats
        self.seed = seed
        self.features = features
        self.classifier = classifier
        self.width = width
        self.n = n
        self.dataset = dataset
        self.config_hash = config_hash
        self.version = version

    @property
    def accuracy_percent(self):
        total = self.confusion.sum()
        return float(100.0 * np.trace(self.confusion) / total) if total else 0.0

    @property
    def compression_ratio(self):
        return self.width / self.n

    def to_dict(self):
        return {
            'dataset': self.dataset,
            'protocol': self.protocol,
            'features': self.features,
            'classifier': self.classifier,
            'accuracy_percent': self.accuracy_percent,
            'classes': self.classes,
            'confusion': self.confusion.tolist(),
            'fold_accuracies': self.fold_accuracies,
            'fold_sizes': self.fold_sizes,
            'model_stats': self.model_stats,
            'width': self.width,
            'n': self.n,
            'compression_ratio': self.compression_ratio,
            'seed': self.seed,
            'config_hash': self.config_hash,
            'version': self.version,
        }

    def to_row(self):
        '''
        flat record for results tables
        '''
        protocol = self.protocol
        if protocol['mode'] == 'cv':
            protocol_text = f"cv:{protocol['k']}"
        elif protocol['mode'] == 'percentage':
            protocol_text = f"split:{protocol['train_fraction']}"
        else:
            protocol_text = 'fixed'
        return {'dataset': self.dataset, 'features': self.features.get('text', self.features['kind']),
                'classifier': self.classifier['name'], 'protocol': protocol_text,
                'accuracy_percent': self.accuracy_percent, 'width': self.width, 'n': self.n,
                'seed': self.seed}


def evaluate(d, featurizer, classifier, spec, seed=None, pool=None):
    '''
    Featurize each (train, test) pair with the same configuration, train, score the test part.
    param featurizer: Featurizer or its text form; classifier: ClassifierConfig or a name
    '''
    if isinstance(featurizer, str):
        featurizer = Featurizer.parse(featurizer)
    if isinstance(classifier, str):
        classifier = ClassifierConfig(classifier)
    seed = spec.seed if seed is None else seed

    pairs = make_splits(d, spec)
    labels = [y for train, test in pairs for y in train.labels + test.labels]
    classes = canonical_classes(labels)
    lookup = {c: i for i, c in enumerate(classes)}
    confusion = np.zeros((len(classes), len(classes)), dtype=np.int64)
    fold_accuracies, fold_sizes, model_stats = [], [], []
    width = None
    for fold, (train, test) in enumerate(pairs):
        ftrain, ftest = featurizer(train), featurizer(test)
        assert ftrain.A == ftest.A, 'train and test features differ in width'
        width = ftrain.A
        model = classifier.fit(ftrain, seed=seed, classes=classes, pool=pool)
        predicted = model.predict_index(ftest.values)
        actual = np.array([lookup[y] for y in ftest.labels], dtype=np.int64)
        np.add.at(confusion, (actual, predicted), 1)
        correct = int(np.sum(actual == predicted))
        fold_accuracies.append(100.0 * correct / test.K)
        fold_sizes.append(test.K)
        model_stats.append(model.size_stats())
        log.debug(f'Fold {fold}: {correct}/{test.K} correct, model {model.size_stats()}')

    features = {'text': str(featurizer), **featurizer.describe()}
    report = EvalReport(spec.describe(), classes, confusion, fold_accuracies, fold_sizes, model_stats, seed,
                        features, classifier.describe(), width, d.n if spec.mode != 'fixed' else spec.train.n,
                        dataset=d.name if spec.mode != 'fixed' else spec.train.name)
    assert confusion.sum() == sum(fold_sizes), 'confusion matrix does not cover every test record'
    log.info(f'{report.dataset} {featurizer} {classifier.name}: accuracy {report.accuracy_percent:.2f}% '
             f'(width {width}, {spec.mode})')
    return report


def results_table(d, columns, classifiers, spec, seed=None, pool=None):
    '''
    One row per classifier, one accuracy column per feature configuration.
    returns (DataFrame, reports in row-major order)
    '''
    featurizers = [Featurizer.parse(c) if isinstance(c, str) else c for c in columns]
    configs = [ClassifierConfig(c) if isinstance(c, str) else c for c in classifiers]
    reports, rows = [], []
    for cfg in configs:
        row = {}
        for featurizer in featurizers:
            report = evaluate(d, featurizer, cfg, spec, seed, pool)
            reports.append(report)
            row[str(featurizer)] = report.accuracy_percent
        rows.append(row)
    frame = pd.DataFrame(rows, index=pd.Index([c.name for c in configs], name='classifier'),
                         columns=[str(f) for f in featurizers])
    return frame, reports
