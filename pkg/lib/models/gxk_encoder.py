"""
Graph-expanded knowledge encoder: a two-layer GCN read out at the mention nodes.

    H1 = relu(M A_hat W1),  H2 = relu(H1 W2)

M holds one one-hot row per entity mention, so M A_hat selects the
normalized neighbourhood row of each mention's node.
"""
from dataclasses import dataclass

import numpy as np

from ..utils import autodiff as ad
from ..utils.autodiff import Module, Parameter
from ..utils.errors import ConfigError, ConsistencyError, ContractError, DimensionError
from .transformer import glorot_init

ADJ_MODES = ('raw', 'sym_norm_selfloops')


@dataclass(frozen=True)
class NormalizedAdjacency:
    matrix: np.ndarray
    mode: str

    @property
    def size(self):
        return self.matrix.shape[0]


def normalize_adjacency(g, mode='sym_norm_selfloops'):
    """Dense N x N adjacency of a VocabGraph or ExpandedGraph.

    raw: the stored weights. sym_norm_selfloops: Deg^-1/2 (A + I) Deg^-1/2
    with Deg the row sums of A + I.
    """
    if mode not in ADJ_MODES:
        raise ConfigError(f'unknown adjacency mode {mode!r}, expected one of {ADJ_MODES}')
    if g.node_count == 0:
        raise ContractError('cannot normalize the adjacency of an empty graph')
    adj = g.adjacency()
    if mode == 'raw':
        return NormalizedAdjacency(matrix=adj, mode=mode)
    adj = adj + np.eye(g.node_count)
    degree = adj.sum(axis=1)
    if np.any(degree <= 0):
        # only reachable with negative NPMI edge weights
        raise ConsistencyError(f'non-positive node degree {degree.min()} in sym_norm mode')
    inv_sqrt = 1.0 / np.sqrt(degree)
    return NormalizedAdjacency(matrix=inv_sqrt[:, None] * adj * inv_sqrt[None, :], mode=mode)


def propagate(M, g, mode='sym_norm_selfloops'):
    """M A_hat from the edge list of ``g``, without the dense N x N matrix.

    Equals ``M @ normalize_adjacency(g, mode).matrix`` up to summation order.
    """
    if mode not in ADJ_MODES:
        raise ConfigError(f'unknown adjacency mode {mode!r}, expected one of {ADJ_MODES}')
    n = g.node_count
    if n == 0:
        raise ContractError('cannot propagate over an empty graph')
    M = np.asarray(M, dtype=np.float64)
    if M.ndim != 2 or M.shape[1] != n:
        raise DimensionError('propagate', M.shape, (n, n))
    i, j, w = g.edge_arrays()
    if mode == 'raw':
        scale = np.ones(n)
        out = np.zeros_like(M)
    else:
        degree = np.ones(n)
        np.add.at(degree, i, w)
        np.add.at(degree, j, w)
        if np.any(degree <= 0):
            raise ConsistencyError(f'non-positive node degree {degree.min()} in sym_norm mode')
        scale = 1.0 / np.sqrt(degree)
        out = M * scale[None, :]
    Y = M * scale[None, :]
    # out[:, j] += Y[:, i] w and out[:, i] += Y[:, j] w
    np.add.at(out.T, j, (Y[:, i] * w).T)
    np.add.at(out.T, i, (Y[:, j] * w).T)
    return out * scale[None, :]


def _layers(MA, w1, w2):
    h1 = ad.relu(ad.matmul(MA, w1))
    return ad.relu(ad.matmul(h1, w2))


def gcn_forward(M, adj, w1, w2):
    """[m x N] mention rows -> [m x d2] entity features; m = 0 gives an empty result."""
    M = ad.as_tensor(M)
    A = ad.as_tensor(adj.matrix if isinstance(adj, NormalizedAdjacency) else adj)
    if M.ndim != 2 or M.shape[1] != A.shape[0]:
        raise DimensionError('gcn_forward', M.shape, A.shape)
    return _layers(ad.matmul(M, A), w1, w2)


def param_rows(g, kb=None):
    """Row of W1 used by every node of ``g``.

    Word nodes use their vocabulary index; added entity nodes use
    vocab_size + the entity's ordinal in the KB, so the same entity shares
    its row across pairs.
    """
    vocab_size = g.vocab_size if hasattr(g, 'vocab_size') else g.node_count
    rows = list(range(vocab_size))
    added = getattr(g, 'added_nodes', ())
    if added:
        if kb is None:
            raise ConsistencyError('expanded graph without its knowledge base')
        rows.extend(vocab_size + kb.ordinal(eid) for eid in added)
    return np.asarray(rows, dtype=np.int64)


@dataclass(frozen=True)
class Propagated:
    """Nonzero columns of M A_hat and the W1 row behind each column."""
    values: np.ndarray
    rows: np.ndarray
    node_count: int

    @property
    def mentions(self):
        return self.values.shape[0]


def compact(MA, rows):
    """Drop the all-zero columns of M A_hat; they contribute nothing to M A_hat W1."""
    MA = np.asarray(MA, dtype=np.float64)
    rows = np.asarray(rows, dtype=np.int64)
    if rows.shape[0] != MA.shape[1]:
        raise DimensionError('compact', MA.shape, rows.shape)
    keep = np.flatnonzero(np.any(MA != 0.0, axis=0))
    return Propagated(values=MA[:, keep], rows=rows[keep], node_count=MA.shape[1])


class GxKEncoder(Module):
    """W1 holds one row per vocabulary word and per KB entity; W2 is d1 x d2."""

    def __init__(self, vocab_size, n_entities, hidden_dim, out_dim, rng):
        super().__init__()
        self.vocab_size = vocab_size
        self.n_entities = n_entities
        self.w1 = Parameter(glorot_init(rng, (vocab_size + n_entities, hidden_dim)))
        self.w2 = Parameter(glorot_init(rng, (hidden_dim, out_dim)))

    @property
    def out_dim(self):
        return self.w2.shape[1]

    def forward(self, propagated):
        """[m x d2] features of one pair's mentions from its ``Propagated`` inputs."""
        w1 = ad.embedding_lookup(self.w1, propagated.rows)
        return _layers(ad.as_tensor(propagated.values), w1, self.w2)
