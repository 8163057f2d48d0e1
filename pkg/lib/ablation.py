"""
Three-row ablation: the full model, the model without the graph branch, and
the model whose GCN runs over the plain NPMI graph without KB expansion.
"""
import os
from dataclasses import dataclass

from loguru import logger

from . import trainer as training
from .datasets import build_datasets
from .utils import util

FULL = 'Sem-KGN'
NO_GRAPH = '(-) Knowledge-enriched Graph Encoder'
NO_KG = '(-) Medical Knowledge-graph'

ROWS = (
    (FULL, 'full', {}),
    (NO_GRAPH, 'no_graph_encoder', {'no_graph_encoder': True}),
    (NO_KG, 'no_kg_expansion', {'no_kg_expansion': True}),
)
METRIC_NAMES = ('accuracy', 'precision', 'recall', 'f1')

# accuracy / precision / recall / f1 decrements reported at full scale
REFERENCE_DELTAS = {
    NO_GRAPH: (8.27, 17.02, 7.90, 12.29),
    NO_KG: (5.52, 0.91, 5.52, 3.61),
}


@dataclass
class AblationRow:
    name: str
    metrics: object
    deltas: tuple = (0.0, 0.0, 0.0, 0.0)


def row_config(cfg, subdir, flags):
    sub = cfg.clone()
    sub.defrost()
    sub.ablation.no_graph_encoder = False
    sub.ablation.no_kg_expansion = False
    for key, value in flags.items():
        setattr(sub.ablation, key, value)
    sub.output_dir = os.path.join(cfg.output_dir, subdir)
    sub.exp_name = f'{cfg.exp_name or "semkgn"}_{subdir}'
    return sub


def run_row(cfg, split='dev'):
    util.check_mkdir(os.path.join(cfg.output_dir, cfg.train.log_dir))
    util.dump_cfg(cfg, os.path.join(cfg.output_dir, 'full_config.yaml'))
    trainer = training.Trainer(config=cfg)
    model = trainer.fit()
    if split == 'train':
        dataset = trainer.train_dataset
    elif split == 'dev' and trainer.val_dataset is not None:
        dataset = trainer.val_dataset
    else:
        dataset = build_datasets.build_train(cfg.dataset, trainer.vocab, mode=split)
    metrics, _ = training.evaluate(model, dataset, threshold=cfg.eval.threshold, num_workers=cfg.eval.num_workers)
    return metrics


def run_ablation(cfg, split='dev'):
    rows = []
    for name, subdir, flags in ROWS:
        logger.info(f'ablation row: {name}')
        metrics = run_row(row_config(cfg, subdir, flags), split=split)
        rows.append(AblationRow(name=name, metrics=metrics))
    full = rows[0].metrics
    for row in rows:
        row.deltas = tuple(getattr(full, m) - getattr(row.metrics, m) for m in METRIC_NAMES)
    return rows


def format_report(rows, split):
    lines = [
        f'# split={split}; precision, recall and f1 on the entail class',
        '# delta_* = Sem-KGN minus the row (positive: the row is worse)',
        '\t'.join(('row',) + METRIC_NAMES + tuple(f'delta_{m}' for m in METRIC_NAMES)),
    ]
    for row in rows:
        values = [getattr(row.metrics, m) for m in METRIC_NAMES] + list(row.deltas)
        lines.append('\t'.join([row.name] + [f'{v:.4f}' for v in values]))
    by_name = {row.name: row for row in rows}
    if FULL in by_name and NO_KG in by_name:
        full, no_kg = by_name[FULL].metrics.accuracy, by_name[NO_KG].metrics.accuracy
        verdict = 'yes' if full > no_kg else 'no'
        lines.append(f'# full model beats {NO_KG}: {verdict} ({full:.4f} vs {no_kg:.4f})')
    for name, deltas in REFERENCE_DELTAS.items():
        lines.append(f'# reference deltas at full scale, {name}: ' + ' / '.join(f'{d:.2f}' for d in deltas))
    return '\n'.join(lines) + '\n'


def write_report(path, rows, split):
    with open(path, 'w', encoding='utf-8', newline='\n') as f:
        f.write(format_report(rows, split))
