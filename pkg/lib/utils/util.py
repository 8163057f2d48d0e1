import os
import random

import numpy as np
import torch
import yaml
from loguru import logger


def copy_state_dict(cur_state_dict, pre_state_dict, prefix='', load_name=None):
    """Copy matching entries of ``pre_state_dict`` into ``cur_state_dict`` in place.

    Keys missing from the source or with a different shape are skipped; the
    names of the copied keys are returned.
    """
    copied = []
    for k in cur_state_dict.keys():
        if load_name is not None and load_name not in k:
            continue
        v = pre_state_dict.get(prefix + k)
        if v is None:
            continue
        v = np.asarray(v, dtype=np.float64)
        if v.shape != cur_state_dict[k].shape:
            logger.warning(f'skip {k}: shape {v.shape} != {cur_state_dict[k].shape}')
            continue
        cur_state_dict[k][...] = v
        copied.append(k)
    return copied


def check_mkdir(path):
    if not os.path.exists(path):
        logger.info(f'creating {path}')
        os.makedirs(path)


def seed_everything(seed):
    """Seed python, numpy and torch (torch only drives DataLoader shuffling here)."""
    random.seed(seed)
    np.random.seed(seed)
    torch.manual_seed(seed)


def dump_cfg(cfg, path):
    with open(path, 'w') as f:
        f.write(cfg.dump(default_flow_style=False))


def dump_yaml(data, path):
    with open(path, 'w', encoding='utf-8') as f:
        yaml.safe_dump(data, f, default_flow_style=False, sort_keys=False, allow_unicode=True)


def load_yaml(path):
    with open(path, encoding='utf-8') as f:
        return yaml.safe_load(f)
