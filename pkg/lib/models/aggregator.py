from dataclasses import dataclass

import numpy as np

from ..utils import autodiff as ad
from ..utils.autodiff import Module, Parameter
from ..utils.errors import ConfigError, DimensionError
from .transformer import Scoped, build_blocks, glorot_init, normal_init

ENTAIL, NOT_ENTAIL = 0, 1


@dataclass(frozen=True)
class AggregatorConfig:
    layers: int = 2
    heads: int = 4
    model_dim: int = 64
    ff_dim: int = 128
    dropout: float = 0.2
    ln_eps: float = 1e-12
    init_std: float = 0.02

    def __post_init__(self):
        if self.model_dim % self.heads != 0:
            raise ConfigError(f'model_dim {self.model_dim} not divisible by heads {self.heads}')
        if self.layers < 0:
            raise ConfigError(f'layers must be >= 0, got {self.layers}')


def aggregator_config(cfg):
    agg = cfg.model.aggregator
    return AggregatorConfig(layers=agg.layers, heads=agg.heads, model_dim=cfg.model.doc_encoder.model_dim,
                            ff_dim=agg.ff_dim, dropout=cfg.model.dropout, ln_eps=cfg.model.doc_encoder.ln_eps,
                            init_std=cfg.model.init_std)


class Aggregator(Scoped):
    """Self-attention over [cls_seed] + d_1..d_n + h_1..h_m projected to model_dim."""

    def __init__(self, graph_dim, config, rng, scope='agg'):
        super().__init__(scope, config.dropout)
        self.config = config
        d = config.model_dim
        self.graph_proj = Parameter(glorot_init(rng, (graph_dim, d)))
        self.cls_seed = Parameter(normal_init(rng, (d,), config.init_std))
        self.blocks = build_blocks(config.layers, d, config.heads, config.ff_dim, rng, config.init_std,
                                   config.dropout, config.ln_eps, scope=f'{scope}.blocks')
        self.last_sequence = None

    def forward(self, doc, graph_feats=None, ctx=None):
        d = self.config.model_dim
        if doc.features.ndim != 2 or doc.features.shape[1] != d:
            raise DimensionError('aggregate', doc.features.shape, (doc.length, d))
        parts = [ad.reshape(self.cls_seed, (1, d)), doc.features]
        if graph_feats is not None:
            if graph_feats.ndim != 2 or graph_feats.shape[1] != self.graph_proj.shape[0]:
                raise DimensionError('aggregate', graph_feats.shape, self.graph_proj.shape)
            parts.append(ad.matmul(graph_feats, self.graph_proj))
        x = ad.concat(parts, axis=0)
        # every position attends to every position
        for block in self.blocks:
            x = block(x, None, ctx)
        # f_1 .. f_{n+m} at positions 1 .. n+m, kept for inspection
        self.last_sequence = x.data
        return ad.reshape(ad.embedding_lookup(x, [0]), (d,))


def aggregate(doc, graph_feats, aggregator, ctx=None, training=False):
    aggregator.train(training)
    return aggregator(doc, graph_feats, ctx)


class Classifier(Module):
    """Two logits W_out^T F + b; column 0 is entail."""

    def __init__(self, model_dim, rng, std=0.02):
        super().__init__()
        self.w_out = Parameter(normal_init(rng, (model_dim, 2), std))
        self.b = Parameter(np.zeros(2))

    def forward(self, F):
        return ad.matmul(ad.reshape(F, (1, F.shape[0])), self.w_out) + self.b


def probabilities(logits):
    """Softmax of a length-2 logit vector."""
    logits = np.asarray(logits, dtype=np.float64).reshape(-1)
    shifted = logits - logits.max()
    e = np.exp(shifted)
    return e / e.sum()


def classify(F, classifier):
    """(p_entail, p_not_entail)."""
    with ad.no_grad():
        logits = classifier(F)
    p = probabilities(logits.data)
    return float(p[ENTAIL]), float(p[NOT_ENTAIL])


def decide(p_entail, threshold=0.5):
    """entail iff p_entail >= threshold."""
    return ENTAIL if p_entail >= threshold else NOT_ENTAIL
