import os
from dataclasses import dataclass
from functools import cached_property
from typing import Optional

import numpy as np
import torch
from loguru import logger

from ..utils.errors import ContractError, DatasetFormatError
from .vocab import encode_pair, tokenize

# class index 0 is the positive (entail) class everywhere
LABELS = ('entail', 'not_entail')
LABEL_TO_ID = {name: i for i, name in enumerate(LABELS)}
HEADER = ('id', 'premise', 'hypothesis', 'label')


@dataclass(frozen=True)
class SentencePair:
    id: str
    premise: str
    hypothesis: str
    label: Optional[str] = None

    @cached_property
    def premise_tokens(self):
        return tokenize(self.premise)

    @cached_property
    def hypothesis_tokens(self):
        return tokenize(self.hypothesis)

    @property
    def label_id(self):
        return None if self.label is None else LABEL_TO_ID[self.label]

    def sentences(self):
        return [self.premise_tokens, self.hypothesis_tokens]


def load_dataset(path, format='tsv'):
    """Read an RQE pair file.

    The header is ``id premise hypothesis [label]`` (tab separated, label
    column optional); the label cell may be empty. Rows are returned in
    file order.
    """
    if format != 'tsv':
        raise DatasetFormatError(f'unsupported dataset format {format!r}', path=path)
    with open(path, encoding='utf-8') as f:
        lines = f.read().split('\n')
    # a trailing newline leaves one empty string
    while lines and lines[-1] == '':
        lines.pop()
    if not lines:
        return []

    header = tuple(lines[0].rstrip('\r').split('\t'))
    if header not in (HEADER, HEADER[:3]):
        raise DatasetFormatError(f'bad header {header}, expected {HEADER}', path=path, line=1)
    n_cols = len(header)

    pairs, seen = [], set()
    for lineno, line in enumerate(lines[1:], start=2):
        cells = line.rstrip('\r').split('\t')
        if len(cells) != n_cols:
            raise DatasetFormatError(f'expected {n_cols} columns, got {len(cells)}', path=path, line=lineno)
        pair_id, premise, hypothesis = cells[0], cells[1], cells[2]
        label = cells[3] if n_cols == 4 and cells[3] != '' else None
        if not pair_id:
            raise DatasetFormatError('empty id', path=path, line=lineno)
        if pair_id in seen:
            raise DatasetFormatError(f'duplicate id {pair_id!r}', path=path, line=lineno)
        if label is not None and label not in LABEL_TO_ID:
            raise DatasetFormatError(f'unknown label {label!r}, expected one of {LABELS}', path=path, line=lineno)
        pair = SentencePair(id=pair_id, premise=premise, hypothesis=hypothesis, label=label)
        if not pair.premise_tokens or not pair.hypothesis_tokens:
            raise DatasetFormatError('premise and hypothesis must be non-empty', path=path, line=lineno)
        seen.add(pair_id)
        pairs.append(pair)
    return pairs


def describe_dataset(pairs):
    counts = {name: 0 for name in LABELS}
    counts['unlabeled'] = 0
    for pair in pairs:
        counts[pair.label if pair.label is not None else 'unlabeled'] += 1
    n = len(pairs)
    return {
        'pairs': n,
        'labels': counts,
        'mean_premise_len': float(np.mean([len(p.premise_tokens) for p in pairs])) if n else 0.0,
        'mean_hypothesis_len': float(np.mean([len(p.hypothesis_tokens) for p in pairs])) if n else 0.0,
    }


def require_labels(pairs, what='training'):
    for pair in pairs:
        if pair.label is None:
            raise ContractError(f'{what} record {pair.id!r} has no label')


class PairDataset(torch.utils.data.Dataset):
    """Sentence pairs with their encoded [CLS] P [SEP] H [SEP] layout."""

    def __init__(self, pairs, vocab, cfg, mode='train', name=None):
        super().__init__()
        self.pairs = list(pairs)
        self.vocab = vocab
        self.mode = mode
        self.name = name or mode
        self.encoded = [encode_pair(p, vocab, p_len=cfg.p_len, h_len=cfg.h_len, max_seq_len=cfg.max_seq_len)
                        for p in self.pairs]
        stats = describe_dataset(self.pairs)
        logger.info(f'{self.name}: {stats["pairs"]} pairs, labels {stats["labels"]}, '
                    f'mean lengths {stats["mean_premise_len"]:.1f} / {stats["mean_hypothesis_len"]:.1f}')

    def __len__(self):
        return len(self.pairs)

    def __getitem__(self, index):
        return {
            'index': index,
            'pair': self.pairs[index],
            'encoded': self.encoded[index],
        }

    @property
    def labels(self):
        return [p.label_id for p in self.pairs]


def collate_pairs(batch):
    """Keep samples as a list; the model runs pair by pair."""
    return list(batch)


def dataset_exists(path):
    return bool(path) and os.path.exists(path)
