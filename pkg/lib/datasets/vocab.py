"""
Word tokenizer, fixed-size dictionary and the [CLS] P [SEP] H [SEP] pair layout.
"""
import collections
import re
from dataclasses import dataclass
from typing import Optional

import numpy as np

from ..utils.errors import ConfigError, ContractError, DatasetFormatError

PAD, CLS, SEP, UNK = '[PAD]', '[CLS]', '[SEP]', '[UNK]'
RESERVED = (PAD, CLS, SEP, UNK)
PAD_ID, CLS_ID, SEP_ID, UNK_ID = range(4)

_TOKEN_RE = re.compile(r'\w+|[^\w\s]', re.UNICODE)


def tokenize(text):
    """Lowercase, split on whitespace and detach every punctuation mark.

    >>> tokenize("Kartagener's syndrome.")
    ['kartagener', "'", 's', 'syndrome', '.']
    """
    return _TOKEN_RE.findall(text.lower())


class Vocabulary(object):
    def __init__(self, index_to_token):
        index_to_token = list(index_to_token)
        if tuple(index_to_token[:4]) != RESERVED:
            raise ContractError(f'vocabulary must start with {RESERVED}')
        token_to_index = {}
        for i, token in enumerate(index_to_token):
            if token in token_to_index:
                raise ContractError(f'duplicate vocabulary token {token!r}')
            token_to_index[token] = i
        self.index_to_token = index_to_token
        self.token_to_index = token_to_index

    @property
    def size(self):
        return len(self.index_to_token)

    def __len__(self):
        return self.size

    def __contains__(self, token):
        return token in self.token_to_index

    def index(self, token):
        return self.token_to_index.get(token, UNK_ID)

    def encode(self, tokens):
        return [self.index(t) for t in tokens]

    def decode(self, ids, skip_special=True):
        out = []
        for i in ids:
            i = int(i)
            if skip_special and i < len(RESERVED):
                continue
            out.append(self.index_to_token[i])
        return out

    def is_reserved(self, index):
        return 0 <= index < len(RESERVED)

    def __eq__(self, other):
        return isinstance(other, Vocabulary) and self.index_to_token == other.index_to_token

    def __repr__(self):
        return f'Vocabulary(size={self.size})'


def build_vocabulary(corpus, max_size=30000):
    """Reserved tokens first, then tokens by descending count, ties broken lexicographically."""
    if max_size < len(RESERVED) + 1:
        raise ConfigError(f'max_dict_size must be >= {len(RESERVED) + 1}, got {max_size}')
    freqs = collections.Counter()
    n_sentences = 0
    for tokens in corpus:
        freqs.update(tokens)
        n_sentences += 1
    if n_sentences == 0:
        raise ContractError('cannot build a vocabulary from an empty corpus')
    items = sorted(((t, c) for t, c in freqs.items() if t not in RESERVED), key=lambda x: (-x[1], x[0]))
    kept = [t for t, _ in items[:max_size - len(RESERVED)]]
    return Vocabulary(list(RESERVED) + kept)


def save_vocabulary(vocab, path):
    with open(path, 'w', encoding='utf-8', newline='\n') as f:
        for token in vocab.index_to_token:
            f.write(token + '\n')


def load_vocabulary(path):
    with open(path, encoding='utf-8') as f:
        tokens = [line.rstrip('\n') for line in f]
    try:
        return Vocabulary(tokens)
    except ContractError as e:
        raise DatasetFormatError(str(e), path=path)


@dataclass(frozen=True)
class EncodedPair:
    token_ids: np.ndarray
    segment_ids: np.ndarray
    attention_mask: np.ndarray
    label_id: Optional[int] = None
    pair_id: Optional[str] = None

    @property
    def length(self):
        return int(self.attention_mask.sum())


def encode_pair(pair, vocab, p_len=160, h_len=40, max_seq_len=204):
    """[CLS] P[:p_len] [SEP] H[:h_len] [SEP] [PAD]... padded to ``max_seq_len``.

    Segment 0 covers [CLS], the premise and its [SEP]; segment 1 the
    hypothesis and the final [SEP]. Pads carry segment 0 and mask 0.
    """
    if p_len + h_len + 3 > max_seq_len:
        raise ConfigError(f'p_len + h_len + 3 = {p_len + h_len + 3} exceeds max_seq_len {max_seq_len}')
    premise = vocab.encode(tokenize(pair.premise)[:p_len])
    hypothesis = vocab.encode(tokenize(pair.hypothesis)[:h_len])
    ids = [CLS_ID] + premise + [SEP_ID] + hypothesis + [SEP_ID]
    segments = [0] * (len(premise) + 2) + [1] * (len(hypothesis) + 1)
    n = len(ids)

    token_ids = np.full(max_seq_len, PAD_ID, dtype=np.int64)
    segment_ids = np.zeros(max_seq_len, dtype=np.int64)
    attention_mask = np.zeros(max_seq_len, dtype=np.int64)
    token_ids[:n] = ids
    segment_ids[:n] = segments
    attention_mask[:n] = 1
    return EncodedPair(token_ids=token_ids, segment_ids=segment_ids, attention_mask=attention_mask,
                       label_id=pair.label_id, pair_id=pair.id)


def decode_pair(encoded, vocab):
    """Inverse of encode_pair on in-vocabulary tokens: (premise tokens, hypothesis tokens)."""
    n = encoded.length
    ids = encoded.token_ids[:n]
    segments = encoded.segment_ids[:n]
    premise = vocab.decode(ids[(segments == 0)])
    hypothesis = vocab.decode(ids[(segments == 1)])
    return premise, hypothesis
