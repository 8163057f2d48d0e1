import math

import numpy as np

from ..utils import autodiff as ad
from ..utils.autodiff import Module, ModuleList, Parameter
from ..utils.errors import ConfigError, ContractError

# additive score for masked keys; exp() of it underflows to exactly 0
MASKED = -1e30


def normal_init(rng, shape, std):
    return rng.normal(0.0, std, size=shape)


def glorot_init(rng, shape):
    limit = np.sqrt(6.0 / (shape[0] + shape[1]))
    return rng.uniform(-limit, limit, size=shape)


def key_mask_bias(mask):
    """0 where the key may be attended, MASKED elsewhere; None when every key is visible."""
    if mask is None:
        return None
    mask = np.asarray(mask)
    return np.where(mask > 0, 0.0, MASKED)


class Scoped(Module):
    """Module that knows its dotted name, used as the dropout layer id."""

    def __init__(self, scope, dropout=0.0):
        super().__init__()
        self.scope = scope
        self.dropout_rate = dropout

    def drop(self, x, ctx, tag):
        if not self.training or self.dropout_rate == 0.0:
            return x
        if ctx is None:
            raise ContractError(f'{self.scope}: dropout at training time needs a DropoutContext')
        return ad.dropout(x, self.dropout_rate, True, ctx.rng(f'{self.scope}.{tag}'))


class Linear(Module):
    def __init__(self, in_dim, out_dim, rng, std=0.02):
        super().__init__()
        self.weight = Parameter(normal_init(rng, (in_dim, out_dim), std))
        self.bias = Parameter(np.zeros(out_dim))

    def forward(self, x):
        return ad.matmul(x, self.weight) + self.bias


class LayerNorm(Module):
    def __init__(self, dim, eps=1e-12):
        super().__init__()
        self.gain = Parameter(np.ones(dim))
        self.bias = Parameter(np.zeros(dim))
        self.eps = eps

    def forward(self, x):
        return ad.layer_norm(x, self.gain, self.bias, self.eps)


class MultiHeadAttention(Scoped):
    def __init__(self, dim, heads, rng, std=0.02, dropout=0.0, scope='attn'):
        super().__init__(scope, dropout)
        if dim % heads != 0:
            raise ConfigError(f'model_dim {dim} not divisible by heads {heads}')
        self.dim = dim
        self.heads = heads
        self.head_dim = dim // heads
        self.query = Linear(dim, dim, rng, std)
        self.key = Linear(dim, dim, rng, std)
        self.value = Linear(dim, dim, rng, std)
        self.out = Linear(dim, dim, rng, std)
        self.last_attention = None

    def _split(self, x):
        n = x.shape[0]
        return ad.transpose(ad.reshape(x, (n, self.heads, self.head_dim)), (1, 0, 2))

    def forward(self, x, bias=None, ctx=None):
        """x: [n x dim]; bias: additive key mask [n] or None."""
        n = x.shape[0]
        q = self._split(self.query(x))
        k = ad.transpose(self._split(self.key(x)), (0, 2, 1))
        v = self._split(self.value(x))
        scores = ad.matmul(q, k) * (1.0 / math.sqrt(self.head_dim))
        if bias is not None:
            scores = scores + bias
        probs = ad.softmax(scores, axis=-1)
        # [heads x n x n], rows over visible keys sum to 1
        self.last_attention = probs.data
        context = ad.matmul(probs, v)
        context = ad.reshape(ad.transpose(context, (1, 0, 2)), (n, self.dim))
        return self.out(context)


class FeedForward(Module):
    def __init__(self, dim, ff_dim, rng, std=0.02):
        super().__init__()
        self.inner = Linear(dim, ff_dim, rng, std)
        self.outer = Linear(ff_dim, dim, rng, std)

    def forward(self, x):
        return self.outer(ad.relu(self.inner(x)))


class TransformerBlock(Scoped):
    """Pre-norm block: x + attn(ln(x)), then h + ffn(ln(h))."""

    def __init__(self, dim, heads, ff_dim, rng, std=0.02, dropout=0.0, eps=1e-12, scope='block'):
        super().__init__(scope, dropout)
        self.ln_attn = LayerNorm(dim, eps)
        self.attn = MultiHeadAttention(dim, heads, rng, std, dropout, scope=f'{scope}.attn')
        self.ln_ffn = LayerNorm(dim, eps)
        self.ffn = FeedForward(dim, ff_dim, rng, std)

    def forward(self, x, bias=None, ctx=None):
        h = x + self.drop(self.attn(self.ln_attn(x), bias, ctx), ctx, 'attn_out')
        return h + self.drop(self.ffn(self.ln_ffn(h)), ctx, 'ffn_out')


def build_blocks(layers, dim, heads, ff_dim, rng, std, dropout, eps, scope):
    return ModuleList([TransformerBlock(dim, heads, ff_dim, rng, std, dropout, eps, scope=f'{scope}.{i}')
                       for i in range(layers)])


def attention_maps(blocks):
    return [b.attn.last_attention for b in blocks]
