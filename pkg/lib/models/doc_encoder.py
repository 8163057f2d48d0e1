from dataclasses import dataclass

import numpy as np
from loguru import logger

from ..utils import autodiff as ad
from ..utils.autodiff import Parameter, Tensor
from ..utils.checkpoint import load_checkpoint, save_checkpoint
from ..utils.errors import ConfigError, ContractError, DimensionError, MissingFeatureError
from .transformer import LayerNorm, Scoped, build_blocks, key_mask_bias, normal_init


@dataclass(frozen=True)
class EncoderConfig:
    layers: int = 2
    heads: int = 4
    model_dim: int = 64
    ff_dim: int = 128
    max_positions: int = 256
    dropout: float = 0.2
    ln_eps: float = 1e-12
    init_std: float = 0.02

    def __post_init__(self):
        if self.model_dim % self.heads != 0:
            raise ConfigError(f'model_dim {self.model_dim} not divisible by heads {self.heads}')
        if self.layers < 0:
            raise ConfigError(f'layers must be >= 0, got {self.layers}')
        if not 0.0 <= self.dropout < 1.0:
            raise ConfigError(f'dropout must lie in [0, 1), got {self.dropout}')


def encoder_config(cfg):
    """EncoderConfig from the full yacs config."""
    enc = cfg.model.doc_encoder
    return EncoderConfig(layers=enc.layers, heads=enc.heads, model_dim=enc.model_dim, ff_dim=enc.ff_dim,
                         max_positions=enc.max_positions, dropout=cfg.model.dropout, ln_eps=enc.ln_eps,
                         init_std=cfg.model.init_std)


@dataclass(frozen=True)
class DocumentEncoding:
    """features: d_1..d_n over the non-pad positions; cls: the row at [CLS]."""
    features: Tensor
    cls: Tensor

    @property
    def length(self):
        return self.features.shape[0]


class DocumentEncoder(Scoped):
    """Token + position + segment embeddings followed by pre-norm transformer blocks."""

    def __init__(self, vocab_size, config, rng, scope='doc'):
        super().__init__(scope, config.dropout)
        self.config = config
        d, std = config.model_dim, config.init_std
        self.token_embedding = Parameter(normal_init(rng, (vocab_size, d), std))
        self.position_embedding = Parameter(normal_init(rng, (config.max_positions, d), std))
        self.segment_embedding = Parameter(normal_init(rng, (2, d), std))
        self.blocks = build_blocks(config.layers, d, config.heads, config.ff_dim, rng, std,
                                   config.dropout, config.ln_eps, scope=f'{scope}.blocks')
        self.ln_final = LayerNorm(d, config.ln_eps)

    def forward(self, encoded, ctx=None):
        ids = np.asarray(encoded.token_ids)
        length = ids.shape[0]
        if length > self.config.max_positions:
            raise ContractError(f'sequence of {length} tokens exceeds max_positions {self.config.max_positions}')
        x = (ad.embedding_lookup(self.token_embedding, ids)
             + ad.embedding_lookup(self.position_embedding, np.arange(length))
             + ad.embedding_lookup(self.segment_embedding, encoded.segment_ids))
        x = self.drop(x, ctx, 'embeddings')
        bias = key_mask_bias(encoded.attention_mask)
        for block in self.blocks:
            x = block(x, bias, ctx)
        x = self.ln_final(x)
        keep = np.flatnonzero(np.asarray(encoded.attention_mask))
        features = ad.embedding_lookup(x, keep)
        cls = ad.reshape(ad.embedding_lookup(x, [0]), (self.config.model_dim,))
        return DocumentEncoding(features=features, cls=cls)


def encode_document(encoded, encoder, ctx=None, training=False):
    encoder.train(training)
    return encoder(encoded, ctx)


class PrecomputedEncoder(object):
    """Offline document features keyed by pair id; returns constant encodings."""

    def __init__(self, features, model_dim=None):
        self.features = {}
        for pair_id, value in features.items():
            value = np.asarray(value, dtype=np.float64)
            if value.ndim != 2 or value.shape[0] < 1:
                raise DimensionError(f'precomputed[{pair_id}]', value.shape, ('n', model_dim))
            if model_dim is not None and value.shape[1] != model_dim:
                raise DimensionError(f'precomputed[{pair_id}]', value.shape, (value.shape[0], model_dim))
            self.features[pair_id] = value
        self.model_dim = model_dim

    def __contains__(self, pair_id):
        return pair_id in self.features

    def __len__(self):
        return len(self.features)

    def __call__(self, pair_id):
        if pair_id not in self.features:
            raise MissingFeatureError(f'no precomputed features for pair {pair_id!r}')
        value = self.features[pair_id]
        return DocumentEncoding(features=Tensor(value), cls=Tensor(value[0]))


def load_precomputed(path, model_dim=None):
    features = load_checkpoint(path)
    logger.info(f'loaded precomputed features for {len(features)} pairs from {path}')
    return PrecomputedEncoder(features, model_dim=model_dim)


def save_precomputed(path, features):
    """Write pair id -> [n x model_dim] features in the checkpoint format."""
    save_checkpoint(path, features)
