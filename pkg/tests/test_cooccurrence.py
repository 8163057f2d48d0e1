import math
from collections import Counter

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from lib.datasets.vocab import RESERVED
from lib.graphs.cooccurrence import (SKIP_IDS, CooccurrenceStats, VocabGraph, build_graph, build_vocab_graph,
                                     count_windows, load_graph, npmi, save_graph)
from lib.utils.errors import ConfigError, ContractError, DatasetFormatError, UndefinedMarginalError

A, B, C, D = 4, 5, 6, 7


def brute_force_windows(corpus, window_size):
    """Enumerate every window explicitly."""
    total, words, pairs = 0, Counter(), Counter()
    for sentence in corpus:
        ids = [i for i in sentence if i not in SKIP_IDS]
        if not ids:
            continue
        starts = range(len(ids) - window_size + 1) if len(ids) >= window_size else [0]
        for s in starts:
            members = set(ids[s:s + window_size])
            total += 1
            for i in members:
                words[i] += 1
                for j in members:
                    if i < j:
                        pairs[(i, j)] += 1
    return total, words, pairs


def stats_of(total, words, pairs, window_size=2):
    return CooccurrenceStats(total_windows=total, word_windows=Counter(words), pair_windows=Counter(pairs),
                             window_size=window_size)


class TestCountWindows:
    def test_single_window(self):
        stats = count_windows([[A, B, C]], window_size=3)
        assert stats.total_windows == 1
        assert all(stats.word_windows[i] == 1 for i in (A, B, C))
        assert all(stats.pair_count(i, j) == 1 for i, j in ((A, B), (B, C), (A, C)))

    def test_repeated_word_counts_once_per_window(self):
        stats = count_windows([[A, B, A]], window_size=2)
        assert stats.total_windows == 2
        assert stats.word_windows[A] == 2 and stats.word_windows[B] == 2
        assert stats.pair_count(B, A) == 2

    def test_windows_never_cross_sentences(self):
        stats = count_windows([[A, B], [C, D]], window_size=2)
        assert stats.total_windows == 2
        assert stats.pair_count(A, C) == 0

    def test_structural_tokens_are_dropped(self):
        stats = count_windows([[1, A, 2, B, 0, 0]], window_size=2)
        assert stats.total_windows == 1
        assert set(stats.word_windows) == {A, B}
        assert count_windows([[0, 1, 2]], window_size=2).total_windows == 0

    def test_unknown_token_is_counted(self):
        stats = count_windows([[3, A]], window_size=2)
        assert stats.word_windows[3] == 1

    def test_window_size_check(self):
        with pytest.raises(ConfigError):
            count_windows([[A, B]], window_size=1)

    @settings(max_examples=20, deadline=None)
    @given(st.lists(st.lists(st.integers(0, 12), max_size=15), max_size=50),
           st.integers(2, 6), st.integers(0, 4))
    def test_matches_brute_force(self, corpus, window_size, num_workers):
        stats = count_windows(corpus, window_size, num_workers=num_workers)
        total, words, pairs = brute_force_windows(corpus, window_size)
        assert stats.total_windows == total
        assert stats.word_windows == words
        assert stats.pair_windows == pairs


class TestNpmi:
    def test_independence(self):
        stats = stats_of(100, {A: 10, B: 10}, {(A, B): 1})
        assert abs(npmi(stats, A, B)) < 1e-9

    def test_worked_example(self):
        stats = stats_of(100, {A: 20, B: 10}, {(A, B): 8})
        assert npmi(stats, A, B) == pytest.approx(math.log(4) / -math.log(0.08), abs=1e-12)
        assert npmi(stats, A, B) == pytest.approx(0.5489, abs=1e-4)

    def test_anchors(self):
        assert npmi(stats_of(10, {A: 3, B: 4}, {}), A, B) == -1.0
        assert npmi(stats_of(5, {A: 5, B: 5}, {(A, B): 5}), A, B) == 1.0

    def test_errors(self):
        stats = stats_of(10, {A: 3, B: 4}, {(A, B): 2})
        with pytest.raises(ContractError):
            npmi(stats, A, A)
        with pytest.raises(UndefinedMarginalError):
            npmi(stats, A, C)

    @settings(max_examples=20, deadline=None)
    @given(st.lists(st.lists(st.integers(4, 10), min_size=1, max_size=12), min_size=1, max_size=50),
           st.integers(2, 5))
    def test_symmetric_bounded_and_exact(self, corpus, window_size):
        stats = count_windows(corpus, window_size)
        words = sorted(stats.word_windows)
        for i in words:
            for j in words:
                if i >= j:
                    continue
                value = npmi(stats, i, j)
                assert value == npmi(stats, j, i)
                assert -1.0 <= value <= 1.0
                count, total = stats.pair_count(i, j), stats.total_windows
                if 0 < count < total:
                    p_ij = count / total
                    p_i, p_j = stats.word_windows[i] / total, stats.word_windows[j] / total
                    expected = math.log(p_ij / (p_i * p_j)) / -math.log(p_ij)
                    assert value == pytest.approx(max(-1.0, min(1.0, expected)), abs=1e-12)


class TestBuildGraph:
    def test_single_edge(self):
        stats = stats_of(100, {A: 20, B: 10, C: 50}, {(A, B): 8, (A, C): 10})
        graph = build_graph(stats, threshold=0.3, node_count=8)
        assert len(graph) == 1
        (i, j, w), = graph.edges
        assert (i, j) == (A, B) and w == pytest.approx(0.5489, abs=1e-4)
        assert graph.neighbors(A) == [B]
        assert graph.weight(B, A) == w

    def test_reserved_tokens_get_no_edges(self):
        stats = count_windows([[3, A], [3, A]], window_size=2)
        assert build_graph(stats, threshold=-1.0, node_count=5).edges == ()

    def test_threshold_one_is_empty(self):
        stats = count_windows([[A, B], [A, B]], window_size=2)
        assert len(build_graph(stats, threshold=1.0)) == 0

    def test_min_pair_count(self):
        stats = stats_of(100, {A: 20, B: 10}, {(A, B): 8})
        assert len(build_graph(stats, threshold=0.3, min_pair_count=9)) == 0

    def test_threshold_range(self):
        with pytest.raises(ConfigError):
            build_graph(stats_of(1, {A: 1}, {}), threshold=1.5)

    @settings(max_examples=20, deadline=None)
    @given(st.lists(st.lists(st.integers(0, 12), max_size=12), min_size=1, max_size=40),
           st.floats(-1.0, 1.0), st.floats(-1.0, 1.0))
    def test_edges_are_exactly_pairs_above_threshold(self, corpus, t1, t2):
        stats = count_windows(corpus, 3)
        low, high = min(t1, t2), max(t1, t2)
        graph = build_graph(stats, threshold=low, node_count=13)
        expected = {(i, j) for (i, j) in stats.pair_windows
                    if i >= len(RESERVED) and j >= len(RESERVED) and npmi(stats, i, j) > low}
        assert {(i, j) for i, j, _ in graph.edges} == expected
        tighter = {(i, j) for i, j, _ in build_graph(stats, threshold=high, node_count=13).edges}
        assert tighter <= expected

    def test_adjacency_is_symmetric(self, toy_pairs, toy_vocab, cfg):
        graph = build_vocab_graph(toy_pairs, toy_vocab, cfg.graph)
        adj = graph.adjacency()
        assert graph.node_count == toy_vocab.size
        np.testing.assert_array_equal(adj, adj.T)
        assert not adj[:len(RESERVED)].any()
        assert all(w > cfg.graph.npmi_threshold for _, _, w in graph.edges)

    def test_bad_edge(self):
        with pytest.raises(AssertionError):
            VocabGraph(node_count=3, edges=((2, 1, 0.5),), threshold=0.3)


class TestGraphFile:
    def test_round_trip(self, tmp_path, toy_pairs, toy_vocab, cfg):
        graph = build_vocab_graph(toy_pairs, toy_vocab, cfg.graph)
        path = str(tmp_path / 'graph.tsv')
        save_graph(graph, path)
        loaded = load_graph(path)
        assert loaded.node_count == graph.node_count
        assert loaded.threshold == graph.threshold
        assert [(i, j) for i, j, _ in loaded.edges] == [(i, j) for i, j, _ in graph.edges]
        np.testing.assert_allclose([w for *_, w in loaded.edges], [w for *_, w in graph.edges], rtol=1e-8)

    @pytest.mark.parametrize('text', ['', 'nodes=x threshold=0.3\n', 'nodes=5 threshold=0.3\n1\t2\n',
                                      'nodes=3 threshold=0.3\n1\t7\t0.5\n'])
    def test_errors(self, tmp_path, text):
        path = tmp_path / 'graph.tsv'
        path.write_text(text)
        with pytest.raises(DatasetFormatError):
            load_graph(str(path))
