from yacs.config import CfgNode as CN
import os

from .errors import ConfigError

cfg = CN()

workdir = os.path.abspath(os.path.join(os.path.dirname(__file__), '..', '..'))

# project settings
cfg.output_dir = ''
cfg.group = 'toy'
cfg.exp_name = None
cfg.seed = 0

# load models
cfg.ckpt_path = ''

# ---------------------------------------------------------------------------- #
# Options for Dataset
# ---------------------------------------------------------------------------- #
cfg.data_dir = os.path.join(workdir, 'data')
cfg.dataset = CN()
cfg.dataset.type = 'rqe'
cfg.dataset.format = 'tsv'
cfg.dataset.train_path = os.path.join(cfg.data_dir, 'toy_rqe.tsv')
cfg.dataset.dev_path = os.path.join(cfg.data_dir, 'toy_rqe_dev.tsv')
cfg.dataset.test_path = ''
cfg.dataset.kb_path = os.path.join(cfg.data_dir, 'toy_kb.tsv')
cfg.dataset.max_dict_size = 30000
cfg.dataset.p_len = 160
cfg.dataset.h_len = 40
# 160 + 40 + 3 special tokens, plus one slot of slack
cfg.dataset.max_seq_len = 204

# ---------------------------------------------------------------------------- #
# Options for the vocabulary graph and its knowledge expansion
# ---------------------------------------------------------------------------- #
cfg.graph = CN()
cfg.graph.window_size = 20
cfg.graph.npmi_threshold = 0.3
cfg.graph.min_pair_count = 1
cfg.graph.hops = 2
cfg.graph.adj_mode = 'sym_norm_selfloops'  # or 'raw'
cfg.graph.relations = []  # empty: every relation type may be traversed
cfg.graph.num_workers = 0

# ---------------------------------------------------------------------------- #
# Options for Sem-KGN model
# ---------------------------------------------------------------------------- #
cfg.model = CN()
cfg.model.dropout = 0.2
cfg.model.init_std = 0.02
cfg.model.doc_encoder = CN()
cfg.model.doc_encoder.layers = 2
cfg.model.doc_encoder.heads = 4
cfg.model.doc_encoder.model_dim = 64
cfg.model.doc_encoder.ff_dim = 128
cfg.model.doc_encoder.max_positions = 256
cfg.model.doc_encoder.ln_eps = 1e-12
# offline features keyed by pair id; when set the toy transformer is not used
cfg.model.doc_encoder.precomputed_path = ''
cfg.model.gcn = CN()
cfg.model.gcn.hidden_dim = 64
cfg.model.gcn.out_dim = 16
cfg.model.aggregator = CN()
cfg.model.aggregator.layers = 2
cfg.model.aggregator.heads = 4
cfg.model.aggregator.ff_dim = 128

# ---------------------------------------------------------------------------- #
# Options for Training
# ---------------------------------------------------------------------------- #
cfg.train = CN()
cfg.train.optimizer = 'adam'
cfg.train.batch_size = 16
cfg.train.epochs = 5
cfg.train.lr = 2e-5
cfg.train.betas = (0.9, 0.999)
cfg.train.adam_eps = 1e-8
# logger
cfg.train.log_dir = 'logs'
cfg.train.log_steps = 10
cfg.train.write_summary = False
cfg.train.wandb_name = 'SemKGN'

# ---------------------------------------------------------------------------- #
# Options for evaluation
# ---------------------------------------------------------------------------- #
cfg.eval = CN()
cfg.eval.split = 'dev'
cfg.eval.threshold = 0.5
cfg.eval.num_workers = 0
cfg.eval.analysis_samples = 50

# ---------------------------------------------------------------------------- #
# Options for the ablation driver
# ---------------------------------------------------------------------------- #
cfg.ablation = CN()
cfg.ablation.no_graph_encoder = False
cfg.ablation.no_kg_expansion = False


def get_cfg_defaults():
    """Get a yacs CfgNode object with default values for Sem-KGN."""
    # Return a clone so that the defaults will not be altered
    # This is for the "local variable" use pattern
    return cfg.clone()


def update_cfg(cfg, cfg_file):
    cfg.merge_from_file(cfg_file)
    return cfg.clone()


def validate_cfg(cfg):
    """Check the TrainConfig / EncoderConfig / AggregatorConfig invariants."""
    ds, gr, md, tr = cfg.dataset, cfg.graph, cfg.model, cfg.train
    checks = [
        (ds.max_dict_size >= 5, f'max_dict_size must be >= 5, got {ds.max_dict_size}'),
        (ds.p_len + ds.h_len + 3 <= ds.max_seq_len,
         f'p_len + h_len + 3 = {ds.p_len + ds.h_len + 3} exceeds max_seq_len {ds.max_seq_len}'),
        (gr.window_size >= 2, f'window_size must be >= 2, got {gr.window_size}'),
        (-1.0 <= gr.npmi_threshold <= 1.0, f'npmi_threshold must lie in [-1, 1], got {gr.npmi_threshold}'),
        (gr.min_pair_count >= 1, f'min_pair_count must be >= 1, got {gr.min_pair_count}'),
        (gr.hops >= 0, f'hops must be >= 0, got {gr.hops}'),
        (gr.adj_mode in ('raw', 'sym_norm_selfloops'), f'unknown adj_mode {gr.adj_mode}'),
        # negative NPMI edges can zero a node degree under symmetric normalization
        (gr.adj_mode == 'raw' or gr.npmi_threshold >= 0.0,
         f'npmi_threshold {gr.npmi_threshold} < 0 needs adj_mode raw'),
        (0.0 <= md.dropout < 1.0, f'dropout must lie in [0, 1), got {md.dropout}'),
        (md.doc_encoder.model_dim % md.doc_encoder.heads == 0,
         f'model_dim {md.doc_encoder.model_dim} not divisible by heads {md.doc_encoder.heads}'),
        (md.doc_encoder.model_dim % md.aggregator.heads == 0,
         f'model_dim {md.doc_encoder.model_dim} not divisible by aggregator heads {md.aggregator.heads}'),
        (md.doc_encoder.max_positions >= ds.max_seq_len,
         f'max_positions {md.doc_encoder.max_positions} < max_seq_len {ds.max_seq_len}'),
        (md.doc_encoder.layers >= 0 and md.aggregator.layers >= 0, 'layer counts must be >= 0'),
        (tr.batch_size >= 1, f'batch_size must be >= 1, got {tr.batch_size}'),
        # lr == 0 is accepted to run with frozen parameters
        (tr.lr >= 0.0, f'learning rate must be positive, got {tr.lr}'),
        (0.0 <= cfg.eval.threshold <= 1.0, f'decision threshold must lie in [0, 1], got {cfg.eval.threshold}'),
    ]
    for ok, message in checks:
        if not ok:
            raise ConfigError(message)
    return cfg

