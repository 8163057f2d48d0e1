"""
Sliding-window co-occurrence statistics and the NPMI vocabulary graph.

    NPMI(i, j) = ln(p(i, j) / (p(i) p(j))) / -ln p(i, j)
    p(i) = #windows containing i / #W,  p(i, j) = #windows containing both / #W
"""
import itertools
import math
from collections import Counter
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field

import numpy as np
from loguru import logger
from tqdm import tqdm

from ..datasets.vocab import CLS_ID, PAD_ID, SEP_ID, RESERVED
from ..utils.errors import ConfigError, ContractError, DatasetFormatError, UndefinedMarginalError

# [UNK] stays in the windows, only structural tokens are dropped
SKIP_IDS = frozenset((PAD_ID, CLS_ID, SEP_ID))


@dataclass
class CooccurrenceStats:
    total_windows: int
    word_windows: Counter
    pair_windows: Counter
    window_size: int

    def p(self, i):
        return self.word_windows.get(i, 0) / self.total_windows

    def pair_count(self, i, j):
        return self.pair_windows.get((min(i, j), max(i, j)), 0)


def corpus_sentences(pairs, vocab):
    """Premise and hypothesis of every pair as two separate id sequences."""
    sentences = []
    for pair in pairs:
        for tokens in pair.sentences():
            sentences.append(vocab.encode(tokens))
    return sentences


def _count_chunk(sentences, window_size):
    total = 0
    words, pairs = Counter(), Counter()
    for sentence in sentences:
        ids = [i for i in sentence if i not in SKIP_IDS]
        if not ids:
            continue
        n_windows = max(1, len(ids) - window_size + 1)
        for start in range(n_windows):
            window = sorted(set(ids[start:start + window_size]))
            total += 1
            words.update(window)
            pairs.update(itertools.combinations(window, 2))
    return total, words, pairs


def count_windows(corpus, window_size, num_workers=0):
    """Count windows per word and per unordered word pair.

    Windows slide with stride 1 inside each sentence and never cross
    sentence boundaries; a sentence shorter than the window is one window.
    Each word or pair counts at most once per window. With ``num_workers``
    > 0 sentences are split into contiguous chunks whose counts are merged
    in chunk order.
    """
    if window_size < 2:
        raise ConfigError(f'window_size must be >= 2, got {window_size}')
    corpus = [list(s) for s in corpus]
    if num_workers and num_workers > 1 and len(corpus) > 1:
        bounds = np.linspace(0, len(corpus), num_workers + 1).astype(int)
        chunks = [corpus[a:b] for a, b in zip(bounds[:-1], bounds[1:])]
        with ThreadPoolExecutor(max_workers=num_workers) as pool:
            results = list(pool.map(lambda c: _count_chunk(c, window_size), chunks))
    else:
        results = [_count_chunk(corpus, window_size)]

    total, words, pairs = 0, Counter(), Counter()
    for t, w, p in results:
        total += t
        words.update(w)
        pairs.update(p)
    return CooccurrenceStats(total_windows=total, word_windows=words, pair_windows=pairs,
                             window_size=window_size)


def npmi(stats, i, j):
    if i == j:
        raise ContractError(f'npmi is undefined for identical indices ({i})')
    if stats.total_windows <= 0:
        raise UndefinedMarginalError('no windows counted')
    if stats.word_windows.get(i, 0) == 0 or stats.word_windows.get(j, 0) == 0:
        raise UndefinedMarginalError(f'word {i if stats.word_windows.get(i, 0) == 0 else j} never occurs')
    count = stats.pair_count(i, j)
    if count == 0:
        return -1.0
    if count == stats.total_windows:
        return 1.0
    p_ij = count / stats.total_windows
    # p(i) p(j) is ordered by index so that npmi(i, j) and npmi(j, i) agree bit for bit
    a, b = min(i, j), max(i, j)
    value = math.log(p_ij / (stats.p(a) * stats.p(b))) / -math.log(p_ij)
    return min(1.0, max(-1.0, value))


@dataclass(frozen=True)
class VocabGraph:
    node_count: int
    edges: tuple
    threshold: float
    _weights: dict = field(default=None, init=False, repr=False, compare=False)
    _arrays: tuple = field(default=None, init=False, repr=False, compare=False)

    def __post_init__(self):
        weights = {}
        for i, j, w in self.edges:
            assert 0 <= i < j < self.node_count, f'bad edge ({i}, {j}) for {self.node_count} nodes'
            weights[(i, j)] = w
        object.__setattr__(self, '_weights', weights)
        ends = np.asarray([(i, j) for i, j, _ in self.edges], dtype=np.int64).reshape(-1, 2)
        object.__setattr__(self, '_arrays', (ends[:, 0], ends[:, 1],
                                             np.asarray([w for _, _, w in self.edges], dtype=np.float64)))

    def edge_arrays(self):
        """Edge list as (i, j, w) arrays, one entry per undirected edge."""
        return self._arrays

    def weight(self, i, j):
        return self._weights.get((min(i, j), max(i, j)))

    def neighbors(self, i):
        return sorted([b if a == i else a for a, b in self._weights if i in (a, b)])

    def adjacency(self):
        adj = np.zeros((self.node_count, self.node_count))
        for i, j, w in self.edges:
            adj[i, j] = adj[j, i] = w
        return adj

    def __len__(self):
        return len(self.edges)


def build_graph(stats, threshold=0.3, min_pair_count=1, node_count=None):
    """Keep (i, j, npmi) when npmi > threshold and the pair is frequent enough.

    Reserved tokens never get edges.
    """
    if not -1.0 <= threshold <= 1.0:
        raise ConfigError(f'npmi threshold must lie in [-1, 1], got {threshold}')
    if node_count is None:
        node_count = max(stats.word_windows, default=-1) + 1
    edges = []
    for (i, j), count in sorted(stats.pair_windows.items()):
        if i < len(RESERVED) or j < len(RESERVED):
            continue
        if count < min_pair_count:
            continue
        w = npmi(stats, i, j)
        if w > threshold:
            edges.append((i, j, w))
    logger.info(f'vocabulary graph: {node_count} nodes, {len(edges)} edges above npmi {threshold}')
    return VocabGraph(node_count=node_count, edges=tuple(edges), threshold=threshold)


def build_vocab_graph(pairs, vocab, cfg):
    """Windows over the training sentences, then the thresholded graph (cfg = cfg.graph)."""
    sentences = corpus_sentences(tqdm(pairs, desc='windows', leave=False), vocab)
    stats = count_windows(sentences, cfg.window_size, num_workers=cfg.num_workers)
    return build_graph(stats, threshold=cfg.npmi_threshold, min_pair_count=cfg.min_pair_count,
                       node_count=vocab.size)


def save_graph(graph, path):
    with open(path, 'w', encoding='utf-8', newline='\n') as f:
        f.write(f'nodes={graph.node_count} threshold={graph.threshold!r}\n')
        for i, j, w in graph.edges:
            f.write(f'{i}\t{j}\t{w:.9g}\n')


def load_graph(path):
    with open(path, encoding='utf-8') as f:
        lines = f.read().splitlines()
    if not lines:
        raise DatasetFormatError('empty graph file', path=path)
    try:
        fields = dict(item.split('=', 1) for item in lines[0].split())
        node_count, threshold = int(fields['nodes']), float(fields['threshold'])
    except (KeyError, ValueError):
        raise DatasetFormatError(f'bad graph header {lines[0]!r}', path=path, line=1)
    edges = []
    for lineno, line in enumerate(lines[1:], start=2):
        if not line:
            continue
        try:
            i, j, w = line.split('\t')
            edges.append((int(i), int(j), float(w)))
        except ValueError:
            raise DatasetFormatError(f'bad edge line {line!r}', path=path, line=lineno)
    try:
        return VocabGraph(node_count=node_count, edges=tuple(edges), threshold=threshold)
    except AssertionError as e:
        raise DatasetFormatError(str(e), path=path)
