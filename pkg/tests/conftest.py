import math
import os

import numpy as np
import pytest
import torch

from lib.datasets.rqe_data import load_dataset
from lib.datasets.vocab import build_vocabulary
from lib.graphs.knowledge import load_kb
from lib.utils.config import get_cfg_defaults, update_cfg, workdir

DATA_DIR = os.path.join(workdir, 'data')
TOY_CFG = os.path.join(workdir, 'configs', 'exp', 'semkgn_toy.yml')


def toy_cfg(output_dir):
    """The shipped toy experiment with absolute data paths."""
    cfg = update_cfg(get_cfg_defaults(), TOY_CFG)
    cfg.output_dir = str(output_dir)
    cfg.dataset.train_path = os.path.join(DATA_DIR, 'toy_rqe.tsv')
    cfg.dataset.dev_path = os.path.join(DATA_DIR, 'toy_rqe_dev.tsv')
    cfg.dataset.kb_path = os.path.join(DATA_DIR, 'toy_kb.tsv')
    return cfg


def small_cfg(output_dir):
    """Toy config shrunk further so a full train run takes seconds."""
    cfg = toy_cfg(output_dir)
    cfg.model.doc_encoder.layers = 1
    cfg.model.doc_encoder.heads = 2
    cfg.model.doc_encoder.model_dim = 16
    cfg.model.doc_encoder.ff_dim = 32
    cfg.model.gcn.hidden_dim = 8
    cfg.model.gcn.out_dim = 4
    cfg.model.aggregator.layers = 1
    cfg.model.aggregator.heads = 2
    cfg.model.aggregator.ff_dim = 32
    cfg.train.epochs = 2
    cfg.train.batch_size = 8
    return cfg


@pytest.fixture
def cfg(tmp_path):
    return small_cfg(tmp_path / 'run')


@pytest.fixture
def toy(tmp_path):
    return toy_cfg(tmp_path / 'toy')


@pytest.fixture(scope='session')
def toy_pairs():
    return load_dataset(os.path.join(DATA_DIR, 'toy_rqe.tsv'))


@pytest.fixture(scope='session')
def dev_pairs():
    return load_dataset(os.path.join(DATA_DIR, 'toy_rqe_dev.tsv'))


@pytest.fixture(scope='session')
def toy_vocab(toy_pairs):
    return build_vocabulary([s for p in toy_pairs for s in p.sentences()])


@pytest.fixture(scope='session')
def toy_kb():
    return load_kb(os.path.join(DATA_DIR, 'toy_kb.tsv'))


def write_tsv(path, rows):
    with open(path, 'w', encoding='utf-8', newline='\n') as f:
        for row in rows:
            f.write('\t'.join(row) + '\n')
    return str(path)


def randomize(module, seed, scale=0.2):
    """Overwrite every parameter with seeded normal draws."""
    rng = np.random.default_rng(seed)
    for _, p in module.named_parameters():
        p.data[...] = rng.normal(scale=scale, size=p.shape)
    return module


def to_torch(a):
    return torch.tensor(np.asarray(a), dtype=torch.float64)


def torch_layer_norm(x, ln):
    return torch.nn.functional.layer_norm(x, (x.shape[-1],), to_torch(ln.gain.data), to_torch(ln.bias.data),
                                          eps=ln.eps)


def torch_linear(x, linear):
    return x @ to_torch(linear.weight.data) + to_torch(linear.bias.data)


def torch_blocks(x, blocks, bias=None):
    """Pre-norm transformer blocks recomputed in torch float64 from the numpy weights."""
    n = x.shape[0]
    for block in blocks:
        attn = block.attn
        h = torch_layer_norm(x, block.ln_attn)
        q, k, v = (torch_linear(h, m).reshape(n, attn.heads, attn.head_dim).transpose(0, 1)
                   for m in (attn.query, attn.key, attn.value))
        scores = q @ k.transpose(1, 2) / math.sqrt(attn.head_dim)
        if bias is not None:
            scores = scores + to_torch(bias)
        context = (torch.softmax(scores, dim=-1) @ v).transpose(0, 1).reshape(n, attn.dim)
        x = x + torch_linear(context, attn.out)
        h = torch_layer_norm(x, block.ln_ffn)
        x = x + torch_linear(torch.relu(torch_linear(h, block.ffn.inner)), block.ffn.outer)
    return x
