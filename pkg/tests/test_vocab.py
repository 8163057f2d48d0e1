import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from lib.datasets.rqe_data import SentencePair
from lib.datasets.vocab import (CLS_ID, PAD_ID, RESERVED, SEP_ID, UNK_ID, Vocabulary, build_vocabulary,
                                decode_pair, encode_pair, load_vocabulary, save_vocabulary, tokenize)
from lib.utils.errors import ConfigError, ContractError, DatasetFormatError


@pytest.mark.parametrize('text,tokens', [
    ('What is Kartagener syndrome?', ['what', 'is', 'kartagener', 'syndrome', '?']),
    ("Kartagener's syndrome.", ['kartagener', "'", 's', 'syndrome', '.']),
    ('  fever,cough  ', ['fever', ',', 'cough']),
    ('', []),
])
def test_tokenize(text, tokens):
    assert tokenize(text) == tokens


def test_build_vocabulary_order():
    corpus = [['b', 'a', 'c'], ['a', 'c'], ['a', 'd']]
    vocab = build_vocabulary(corpus)
    assert vocab.index_to_token == list(RESERVED) + ['a', 'c', 'b', 'd']
    assert vocab.index('a') == 4
    assert vocab.index('never-seen') == UNK_ID


def test_build_vocabulary_truncates():
    corpus = [['x'] * 3 + ['y'] * 2 + ['z']]
    vocab = build_vocabulary(corpus, max_size=6)
    assert vocab.index_to_token == list(RESERVED) + ['x', 'y']
    assert vocab.index('z') == UNK_ID


def test_build_vocabulary_errors():
    with pytest.raises(ConfigError):
        build_vocabulary([['a']], max_size=4)
    with pytest.raises(ContractError):
        build_vocabulary([])


def test_reserved_tokens_in_text_are_not_duplicated():
    vocab = build_vocabulary([['[pad]', 'a'], ['[PAD]']])
    assert vocab.index_to_token.count('[PAD]') == 1


@settings(max_examples=50, deadline=None)
@given(st.lists(st.lists(st.sampled_from(['fever', 'cough', 'flu', 'rash', 'pain', 'dose']), max_size=8),
                min_size=1, max_size=10))
def test_vocabulary_is_a_bijection(corpus):
    vocab = build_vocabulary(corpus)
    for i, token in enumerate(vocab.index_to_token):
        assert vocab.index(token) == i
    counts = [sum(s.count(t) for s in corpus) for t in vocab.index_to_token[len(RESERVED):]]
    assert counts == sorted(counts, reverse=True)


def test_vocabulary_round_trip(tmp_path, toy_vocab):
    path = str(tmp_path / 'vocab.txt')
    save_vocabulary(toy_vocab, path)
    assert load_vocabulary(path) == toy_vocab


def test_load_vocabulary_errors(tmp_path):
    path = tmp_path / 'vocab.txt'
    path.write_text('a\nb\n')
    with pytest.raises(DatasetFormatError):
        load_vocabulary(str(path))
    path.write_text('\n'.join(RESERVED + ('a', 'a')) + '\n')
    with pytest.raises(DatasetFormatError):
        load_vocabulary(str(path))
    with pytest.raises(ContractError):
        Vocabulary(list(RESERVED) + ['x', 'x'])


class TestEncodePair:
    vocab = Vocabulary(list(RESERVED) + ['what', 'is', 'flu', '?', 'fever'])

    def test_layout(self):
        pair = SentencePair('p1', 'What is flu?', 'fever', label='entail')
        enc = encode_pair(pair, self.vocab, p_len=5, h_len=3, max_seq_len=12)
        w, i, f, q, fe = range(4, 9)
        np.testing.assert_array_equal(enc.token_ids, [CLS_ID, w, i, f, q, SEP_ID, fe, SEP_ID] + [PAD_ID] * 4)
        np.testing.assert_array_equal(enc.segment_ids, [0] * 6 + [1] * 2 + [0] * 4)
        np.testing.assert_array_equal(enc.attention_mask, [1] * 8 + [0] * 4)
        assert enc.length == 8
        assert enc.label_id == 0 and enc.pair_id == 'p1'

    def test_truncation_and_unknown(self):
        pair = SentencePair('p2', 'what is flu what is flu', 'unknown words here', label=None)
        enc = encode_pair(pair, self.vocab, p_len=2, h_len=1, max_seq_len=6)
        np.testing.assert_array_equal(enc.token_ids, [CLS_ID, 4, 5, SEP_ID, UNK_ID, SEP_ID])
        assert enc.label_id is None

    def test_budget_check(self):
        pair = SentencePair('p3', 'flu', 'flu')
        with pytest.raises(ConfigError):
            encode_pair(pair, self.vocab, p_len=5, h_len=5, max_seq_len=12)

    def test_decode(self):
        pair = SentencePair('p4', 'What is flu?', 'fever?')
        premise, hypothesis = decode_pair(encode_pair(pair, self.vocab, 8, 4, 16), self.vocab)
        assert premise == ['what', 'is', 'flu', '?']
        assert hypothesis == ['fever', '?']
