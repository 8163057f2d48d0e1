import os
from concurrent.futures import ThreadPoolExecutor

import numpy as np
import torch
import wandb
from loguru import logger
from torch.utils.data import DataLoader
from tqdm import tqdm

from .datasets import build_datasets
from .datasets.rqe_data import LABELS, collate_pairs, require_labels
from .datasets.vocab import build_vocabulary, load_vocabulary, save_vocabulary
from .graphs import knowledge
from .graphs.cooccurrence import build_vocab_graph, load_graph, save_graph
from .models.aggregator import ENTAIL
from .models.doc_encoder import load_precomputed
from .models.semkgn import SemKGN
from .utils import autodiff as ad
from .utils import util
from .utils.checkpoint import load_checkpoint, save_checkpoint
from .utils.config import cfg as default_cfg
from .utils.errors import ContractError, UsageError
from .utils.metric import compute_metrics, write_metrics
from .utils.optim import Adam

VOCAB_FILE = 'vocab.txt'
GRAPH_FILE = 'graph.tsv'
CKPT_FILE = 'model.ckpt'
TRAIN_LOG = 'train_log.tsv'
METRICS_FILE = 'metrics.tsv'
TRAIN_LOG_HEADER = ('epoch', 'loss', 'accuracy', 'precision', 'recall', 'f1')


def needs_kb(cfg):
    return not cfg.ablation.no_graph_encoder


def load_resources(cfg):
    """Knowledge base and precomputed features named by ``cfg``; None where unused."""
    kb = None
    if needs_kb(cfg) and cfg.dataset.kb_path:
        if not os.path.exists(cfg.dataset.kb_path):
            raise UsageError(f'knowledge base not found: {cfg.dataset.kb_path}')
        kb = knowledge.load_kb(cfg.dataset.kb_path)
    precomputed = None
    if cfg.model.doc_encoder.precomputed_path:
        precomputed = load_precomputed(cfg.model.doc_encoder.precomputed_path,
                                       model_dim=cfg.model.doc_encoder.model_dim)
    return kb, precomputed


def build_model(cfg, vocab, graph=None):
    kb, precomputed = load_resources(cfg)
    if cfg.ablation.no_graph_encoder:
        graph = None
    return SemKGN(cfg, vocab, graph=graph, kb=kb, precomputed=precomputed)


def prepare_corpus(cfg, with_graph=None):
    """Labeled training pairs, their vocabulary and (unless the graph branch is off) the NPMI graph."""
    pairs = build_datasets.load_split(cfg.dataset, mode='train')
    if not pairs:
        raise ContractError(f'empty training set {cfg.dataset.train_path}')
    require_labels(pairs)
    vocab = build_vocabulary([s for p in pairs for s in p.sentences()], max_size=cfg.dataset.max_dict_size)
    if with_graph is None:
        with_graph = not cfg.ablation.no_graph_encoder
    graph = build_vocab_graph(pairs, vocab, cfg.graph) if with_graph else None
    return pairs, vocab, graph


def load_trained(cfg, model_dir=None):
    """Vocabulary, graph and weights written by a training run in ``model_dir``."""
    model_dir = model_dir or cfg.output_dir
    for name in (VOCAB_FILE, CKPT_FILE):
        if not os.path.exists(os.path.join(model_dir, name)):
            raise UsageError(f'{name} not found in {model_dir}; run train first')
    vocab = load_vocabulary(os.path.join(model_dir, VOCAB_FILE))
    graph = None
    if not cfg.ablation.no_graph_encoder:
        graph = load_graph(os.path.join(model_dir, GRAPH_FILE))
    model = build_model(cfg, vocab, graph)
    model.load_state_dict(load_checkpoint(os.path.join(model_dir, CKPT_FILE)))
    model.eval()
    return model


def evaluate(model, dataset, threshold=0.5, num_workers=0):
    """Metrics of ``model`` on a labeled PairDataset plus per-pair (id, p_entail, label) rows.

    Pairs may be scored by ``num_workers`` threads; parameters are frozen
    and results are reduced in dataset order.
    """
    if len(dataset) == 0:
        raise ContractError('cannot evaluate on an empty dataset')
    require_labels(dataset.pairs, what='evaluation')
    model.eval()
    model.prepare(dataset.pairs)
    samples = [dataset[i] for i in range(len(dataset))]
    if num_workers and num_workers > 1:
        with ThreadPoolExecutor(max_workers=num_workers) as pool:
            probs = list(pool.map(model.predict_proba, samples))
    else:
        probs = [model.predict_proba(s) for s in tqdm(samples, desc='eval', leave=False)]
    predictions = [ENTAIL if p >= threshold else 1 - ENTAIL for p in probs]
    metrics = compute_metrics(predictions, dataset.labels)
    rows = [(pair.id, p, LABELS[y]) for pair, p, y in zip(dataset.pairs, probs, predictions)]
    return metrics, rows


def write_predictions(path, rows):
    with open(path, 'w', encoding='utf-8', newline='\n') as f:
        f.write('id\tp_entail\tlabel\n')
        for pair_id, p, label in rows:
            f.write(f'{pair_id}\t{p:.6f}\t{label}\n')


class Trainer(object):
    def __init__(self, config=None):
        if config is None:
            self.cfg = default_cfg
        else:
            self.cfg = config
        self.batch_size = self.cfg.train.batch_size

        # log to file as well as the console
        self.savefolder = self.cfg.output_dir
        logfolder = os.path.join(self.cfg.output_dir, self.cfg.train.log_dir)
        util.check_mkdir(logfolder)
        self._log_handler = logger.add(os.path.join(logfolder, 'train.log'), level='INFO')

        util.seed_everything(self.cfg.seed)
        self.prepare_data()
        self.model = build_model(self.cfg, self.vocab, self.graph)
        self.configure_optimizers()
        self.load_checkpoint()

        wandb.init(
            project=self.cfg.train.wandb_name,
            name=self.cfg.exp_name,
            group=self.cfg.group,
            dir=logfolder,
            config=self.cfg,
            mode='online' if self.cfg.train.write_summary else 'disabled')

    def prepare_data(self):
        self.train_pairs, self.vocab, self.graph = prepare_corpus(self.cfg)
        self.train_dataset = build_datasets.build_train(self.cfg.dataset, self.vocab, mode='train',
                                                        pairs=self.train_pairs)
        self.val_dataset = None
        if self.cfg.dataset.dev_path:
            self.val_dataset = build_datasets.build_train(self.cfg.dataset, self.vocab, mode='dev')
        logger.info(f'---- training data numbers: {len(self.train_dataset)}, vocabulary size {self.vocab.size}')

    def configure_optimizers(self):
        if self.cfg.train.optimizer != 'adam':
            raise UsageError(f'unknown optimizer {self.cfg.train.optimizer!r}')
        self.optimizer = Adam(self.model.parameters(), lr=self.cfg.train.lr, betas=tuple(self.cfg.train.betas),
                              eps=self.cfg.train.adam_eps)

    def load_checkpoint(self):
        self.global_step = 0
        if self.cfg.ckpt_path and os.path.exists(self.cfg.ckpt_path):
            state = self.model.state_dict()
            copied = util.copy_state_dict(state, load_checkpoint(self.cfg.ckpt_path))
            self.model.load_state_dict(state)
            logger.info(f'initialized {len(copied)} tensors from {self.cfg.ckpt_path}')
        else:
            logger.info('model path not found, start training from scratch')

    def training_step(self, batch):
        self.model.train()
        loss = self.model.loss(batch, step=self.global_step)
        self.optimizer.zero_grad()
        ad.backward(loss)
        self.optimizer.step()
        self.global_step += 1
        return loss.item()

    def validation_step(self, dataset=None):
        if dataset is None:
            dataset = self.val_dataset if self.val_dataset is not None else self.train_dataset
        metrics, _ = evaluate(self.model, dataset, threshold=self.cfg.eval.threshold,
                              num_workers=self.cfg.eval.num_workers)
        return metrics

    def fit(self):
        self.model.prepare(self.train_dataset.pairs)
        best_acc, best_state, best_epoch = None, self.model.state_dict(), -1
        self.epoch_log = []
        for epoch in tqdm(range(self.cfg.train.epochs), desc='epochs'):
            generator = torch.Generator()
            generator.manual_seed(self.cfg.seed + epoch)
            loader = DataLoader(self.train_dataset, batch_size=self.batch_size, shuffle=True,
                                generator=generator, collate_fn=collate_pairs, num_workers=0)
            losses = []
            for batch in loader:
                loss = self.training_step(batch)
                losses.append(loss)
                if self.global_step % self.cfg.train.log_steps == 0:
                    logger.info(f'epoch {epoch} step {self.global_step}: loss {loss:.6f}')
                    wandb.log({'train/loss': loss}, step=self.global_step)
            metrics = self.validation_step()
            row = (epoch, float(np.mean(losses)), metrics.accuracy, metrics.precision, metrics.recall, metrics.f1)
            self.epoch_log.append(row)
            logger.info(f'epoch {epoch}: loss {row[1]:.6f}, accuracy {metrics.accuracy:.2f}, f1 {metrics.f1:.2f}')
            wandb.log({'val/accuracy': metrics.accuracy, 'val/precision': metrics.precision,
                       'val/recall': metrics.recall, 'val/f1': metrics.f1, 'epoch': epoch}, step=self.global_step)
            # ties go to the later epoch
            if best_acc is None or metrics.accuracy >= best_acc:
                best_acc, best_state, best_epoch = metrics.accuracy, self.model.state_dict(), epoch
        self.model.load_state_dict(best_state)
        self.best_epoch = best_epoch
        logger.info(f'best epoch {best_epoch} with accuracy {best_acc}')
        self.save_artifacts()
        wandb.finish()
        logger.remove(self._log_handler)
        return self.model

    def save_artifacts(self):
        out = self.cfg.output_dir
        save_vocabulary(self.vocab, os.path.join(out, VOCAB_FILE))
        if self.graph is not None:
            save_graph(self.graph, os.path.join(out, GRAPH_FILE))
        save_checkpoint(os.path.join(out, CKPT_FILE), self.model.state_dict())
        with open(os.path.join(out, TRAIN_LOG), 'w', encoding='utf-8', newline='\n') as f:
            f.write('\t'.join(TRAIN_LOG_HEADER) + '\n')
            for epoch, loss, *scores in self.epoch_log:
                f.write(f'{epoch}\t{loss:.9g}\t' + '\t'.join(f'{s:.4f}' for s in scores) + '\n')
        split = 'dev' if self.val_dataset is not None else 'train'
        metrics = self.validation_step()
        write_metrics(os.path.join(out, METRICS_FILE), metrics, split)
