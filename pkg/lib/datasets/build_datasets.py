from ..utils.errors import ConfigError, UsageError


def _check_type(cfg):
    if cfg.type != 'rqe':
        raise ConfigError(f'unknown dataset type {cfg.type!r}')


def split_path(cfg, mode='train'):
    path = getattr(cfg, f'{mode}_path', '')
    if not path:
        raise UsageError(f'no {mode} split configured (dataset.{mode}_path)')
    return path


def load_split(cfg, mode='train'):
    _check_type(cfg)
    from .rqe_data import dataset_exists, load_dataset
    path = split_path(cfg, mode)
    if not dataset_exists(path):
        raise UsageError(f'{mode} split not found: {path}')
    return load_dataset(path, format=cfg.format)


def build_train(cfg, vocab, mode='train', pairs=None):
    _check_type(cfg)
    from .rqe_data import PairDataset
    if pairs is None:
        pairs = load_split(cfg, mode)
    return PairDataset(pairs, vocab, cfg, mode=mode)
