import numpy as np
import pytest
import torch

from lib.models.aggregator import (ENTAIL, NOT_ENTAIL, Aggregator, AggregatorConfig, Classifier, aggregate,
                                   classify, decide, probabilities)
from lib.models.doc_encoder import DocumentEncoding
from lib.models.transformer import attention_maps
from lib.utils import autodiff as ad
from lib.utils.errors import ConfigError, DimensionError

from .conftest import randomize, to_torch, torch_blocks

D, GRAPH_DIM = 16, 4


def doc_encoding(n=5, seed=0):
    features = np.random.default_rng(seed).normal(size=(n, D))
    return DocumentEncoding(features=ad.Tensor(features), cls=ad.Tensor(features[0]))


def graph_feats(m=3, seed=1):
    return ad.Tensor(np.random.default_rng(seed).normal(size=(m, GRAPH_DIM)))


def make_aggregator(layers=2, dropout=0.0):
    config = AggregatorConfig(layers=layers, heads=4, model_dim=D, ff_dim=32, dropout=dropout)
    return Aggregator(GRAPH_DIM, config, ad.counter_rng(0, 'init'))


def test_config_checks():
    with pytest.raises(ConfigError):
        AggregatorConfig(model_dim=10, heads=4)


def test_zero_layers_returns_cls_seed():
    agg = make_aggregator(layers=0)
    F = aggregate(doc_encoding(), graph_feats(), agg)
    np.testing.assert_array_equal(F.data, agg.cls_seed.data)


def test_sequence_layout():
    agg = make_aggregator()
    F = aggregate(doc_encoding(n=5), graph_feats(m=3), agg)
    assert F.shape == (D,)
    assert agg.last_sequence.shape == (1 + 5 + 3, D)
    for probs in attention_maps(agg.blocks):
        assert probs.shape == (4, 9, 9)
        np.testing.assert_allclose(probs.sum(axis=-1), 1.0, atol=1e-10)


def test_graph_free_path():
    agg = make_aggregator()
    F = aggregate(doc_encoding(n=5), None, agg)
    assert F.shape == (D,)
    assert agg.last_sequence.shape == (6, D)
    empty = aggregate(doc_encoding(n=5), ad.Tensor(np.zeros((0, GRAPH_DIM))), agg)
    np.testing.assert_array_equal(empty.data, F.data)


def test_zero_projection_hides_graph_content():
    agg = make_aggregator()
    agg.graph_proj.data[...] = 0.0
    a = aggregate(doc_encoding(), graph_feats(seed=1), agg).data
    b = aggregate(doc_encoding(), graph_feats(seed=2), agg).data
    np.testing.assert_array_equal(a, b)


def test_dimension_errors():
    agg = make_aggregator()
    with pytest.raises(DimensionError):
        aggregate(doc_encoding(), ad.Tensor(np.zeros((2, GRAPH_DIM + 1))), agg)
    bad = DocumentEncoding(features=ad.Tensor(np.zeros((3, D + 2))), cls=ad.Tensor(np.zeros(D + 2)))
    with pytest.raises(DimensionError):
        aggregate(bad, None, agg)


def test_gradcheck():
    agg = make_aggregator(dropout=0.1)
    agg.train()
    doc, feats = doc_encoding(), graph_feats()
    ctx = ad.DropoutContext(seed=0, step=1, sample=2)
    w = np.random.default_rng(3).normal(size=D)

    def f(_):
        return ad.sum(agg(doc, feats, ctx) * w)

    for name, p in agg.named_parameters():
        err = ad.finite_diff_check(f, p, eps=1e-6, max_coords=6, rng=ad.counter_rng(0, name))
        assert err < 1e-4, name


class TestClassify:
    def test_zero_weights_is_uniform(self):
        clf = Classifier(D, ad.counter_rng(0))
        clf.w_out.data[...] = 0.0
        assert classify(ad.Tensor(np.ones(D)), clf) == (0.5, 0.5)

    def test_logits_one_zero(self):
        clf = Classifier(D, ad.counter_rng(0))
        clf.w_out.data[...] = 0.0
        clf.b.data[...] = [1.0, 0.0]
        p_entail, p_not = classify(ad.Tensor(np.ones(D)), clf)
        assert p_entail == pytest.approx(0.73106, abs=1e-5)
        assert p_not == pytest.approx(0.26894, abs=1e-5)

    def test_sums_to_one_and_shift_invariant(self):
        rng = np.random.default_rng(0)
        for _ in range(20):
            logits = rng.normal(scale=3.0, size=2)
            p = probabilities(logits)
            assert abs(p.sum() - 1.0) < 1e-12
            np.testing.assert_allclose(probabilities(logits + rng.normal(scale=10.0)), p, atol=1e-12)

    def test_logit_shape(self):
        clf = Classifier(D, ad.counter_rng(0))
        assert clf(ad.Tensor(np.ones(D))).shape == (1, 2)

    @pytest.mark.parametrize('p,label', [(0.5, ENTAIL), (0.9, ENTAIL), (0.2, NOT_ENTAIL), (0.4999999, NOT_ENTAIL)])
    def test_decide(self, p, label):
        assert decide(p) == label

    def test_decide_threshold(self):
        assert decide(0.6, threshold=0.7) == NOT_ENTAIL
        assert decide(0.7, threshold=0.7) == ENTAIL


class TestAgainstTorch:
    """F at toy scale recomputed independently in torch float64."""

    TOY = AggregatorConfig(layers=2, heads=4, model_dim=64, ff_dim=128, dropout=0.0)

    def inputs(self, n=9, m=3, seed=5):
        rng = np.random.default_rng(seed)
        features = rng.normal(size=(n, 64))
        doc = DocumentEncoding(features=ad.Tensor(features), cls=ad.Tensor(features[0]))
        return doc, ad.Tensor(rng.normal(size=(m, 16)))

    def reference(self, agg, doc, feats):
        parts = [to_torch(agg.cls_seed.data)[None, :], to_torch(doc.features.data)]
        if feats is not None:
            parts.append(to_torch(feats.data) @ to_torch(agg.graph_proj.data))
        return torch_blocks(torch.cat(parts, dim=0), agg.blocks)[0].numpy()

    @pytest.mark.parametrize('with_graph', [True, False])
    def test_fused_vector(self, with_graph):
        agg = randomize(Aggregator(16, self.TOY, ad.counter_rng(0, 'init')), seed=7)
        doc, feats = self.inputs()
        feats = feats if with_graph else None
        F = aggregate(doc, feats, agg)
        np.testing.assert_allclose(F.data, self.reference(agg, doc, feats), rtol=1e-9, atol=1e-10)
        assert agg.last_sequence.shape == (1 + 9 + (3 if with_graph else 0), 64)

    def test_seeded_init(self):
        agg = Aggregator(16, self.TOY, ad.counter_rng(0, 'init'))
        doc, feats = self.inputs(seed=6)
        np.testing.assert_allclose(aggregate(doc, feats, agg).data, self.reference(agg, doc, feats),
                                   rtol=1e-9, atol=1e-10)
