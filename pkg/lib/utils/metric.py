from dataclasses import dataclass, asdict

from .errors import ContractError

# entail is the positive class for precision / recall / f1
POSITIVE = 0


@dataclass(frozen=True)
class Metrics:
    accuracy: float
    precision: float
    recall: float
    f1: float
    tp: int
    fp: int
    fn: int
    tn: int

    def as_dict(self):
        return asdict(self)


def confusion(predictions, labels, positive=POSITIVE):
    tp = fp = fn = tn = 0
    for pred, gold in zip(predictions, labels):
        if pred == positive:
            if gold == positive:
                tp += 1
            else:
                fp += 1
        else:
            if gold == positive:
                fn += 1
            else:
                tn += 1
    return tp, fp, fn, tn


def metrics_from_counts(tp, fp, fn, tn):
    total = tp + fp + fn + tn
    if total == 0:
        raise ContractError('cannot compute metrics of an empty dataset')
    precision = tp / (tp + fp) if tp + fp else 0.0
    recall = tp / (tp + fn) if tp + fn else 0.0
    f1 = 2 * precision * recall / (precision + recall) if precision + recall else 0.0
    return Metrics(accuracy=100.0 * (tp + tn) / total,
                   precision=100.0 * precision,
                   recall=100.0 * recall,
                   f1=100.0 * f1,
                   tp=tp, fp=fp, fn=fn, tn=tn)


def compute_metrics(predictions, labels):
    predictions, labels = list(predictions), list(labels)
    if len(predictions) != len(labels):
        raise ContractError(f'{len(predictions)} predictions for {len(labels)} labels')
    return metrics_from_counts(*confusion(predictions, labels))


def format_metrics(metrics, split):
    lines = [
        f'split\t{split}',
        'positive_class\tentail',
        f'accuracy\t{metrics.accuracy:.4f}',
        f'precision\t{metrics.precision:.4f}',
        f'recall\t{metrics.recall:.4f}',
        f'f1\t{metrics.f1:.4f}',
        f'tp\t{metrics.tp}',
        f'fp\t{metrics.fp}',
        f'fn\t{metrics.fn}',
        f'tn\t{metrics.tn}',
    ]
    return '\n'.join(lines) + '\n'


def write_metrics(path, metrics, split):
    with open(path, 'w', encoding='utf-8') as f:
        f.write(format_metrics(metrics, split))


def read_metrics(path):
    values = {}
    with open(path, encoding='utf-8') as f:
        for line in f:
            key, value = line.rstrip('\n').split('\t')
            values[key] = value
    return values
