import os

import numpy as np
import pytest

from lib import trainer as training
from lib.datasets import build_datasets
from lib.utils.errors import ContractError, UsageError
from lib.utils.metric import read_metrics

from .conftest import small_cfg


def fitted(cfg):
    trainer = training.Trainer(config=cfg)
    trainer.fit()
    return trainer


class TestTrainer:
    def test_artifacts(self, cfg):
        trainer = fitted(cfg)
        for name in (training.VOCAB_FILE, training.GRAPH_FILE, training.CKPT_FILE, training.TRAIN_LOG,
                     training.METRICS_FILE):
            assert os.path.exists(os.path.join(cfg.output_dir, name)), name
        assert len(trainer.epoch_log) == cfg.train.epochs
        with open(os.path.join(cfg.output_dir, training.TRAIN_LOG), encoding='utf-8') as f:
            lines = f.read().splitlines()
        assert lines[0].split('\t') == list(training.TRAIN_LOG_HEADER)
        assert len(lines) == cfg.train.epochs + 1
        values = read_metrics(os.path.join(cfg.output_dir, training.METRICS_FILE))
        assert values['split'] == 'dev'
        assert int(values['tp']) + int(values['fp']) + int(values['fn']) + int(values['tn']) == 12

    def test_zero_learning_rate_keeps_weights(self, cfg):
        cfg.train.lr = 0.0
        trainer = training.Trainer(config=cfg)
        before = trainer.model.state_dict()
        trainer.fit()
        after = trainer.model.state_dict()
        for name in before:
            np.testing.assert_array_equal(before[name], after[name])

    def test_same_seed_same_run(self, tmp_path):
        runs = []
        for name in ('a', 'b'):
            cfg = small_cfg(tmp_path / name)
            runs.append((cfg.output_dir, fitted(cfg).epoch_log))
        (dir_a, log_a), (dir_b, log_b) = runs
        assert log_a == log_b
        for name in (training.GRAPH_FILE, training.CKPT_FILE, training.METRICS_FILE, training.TRAIN_LOG):
            with open(os.path.join(dir_a, name), 'rb') as fa, open(os.path.join(dir_b, name), 'rb') as fb:
                assert fa.read() == fb.read(), name

    def test_best_epoch_is_restored(self, cfg):
        trainer = fitted(cfg)
        accuracies = [row[2] for row in trainer.epoch_log]
        best = max(accuracies)
        assert trainer.best_epoch == max(i for i, a in enumerate(accuracies) if a == best)
        metrics = trainer.validation_step()
        assert metrics.accuracy == best

    def test_unknown_optimizer(self, cfg):
        cfg.train.optimizer = 'sgd'
        with pytest.raises(UsageError):
            training.Trainer(config=cfg)

    def test_load_trained(self, cfg):
        trainer = fitted(cfg)
        model = training.load_trained(cfg)
        state = trainer.model.state_dict()
        for name, value in model.state_dict().items():
            np.testing.assert_array_equal(value, state[name])

    def test_load_trained_needs_a_run(self, cfg):
        with pytest.raises(UsageError):
            training.load_trained(cfg, model_dir=str(cfg.output_dir))

    @pytest.mark.slow
    def test_overfits_the_toy_set(self, toy):
        toy.dataset.dev_path = ''
        toy.model.dropout = 0.0
        toy.train.epochs = 200
        trainer = fitted(toy)
        metrics, _ = training.evaluate(trainer.model, trainer.train_dataset)
        assert metrics.accuracy >= 95.0


class TestEvaluate:
    def test_empty_dataset(self, cfg):
        pairs, vocab, graph = training.prepare_corpus(cfg)
        model = training.build_model(cfg, vocab, graph)
        empty = build_datasets.build_train(cfg.dataset, vocab, pairs=[])
        with pytest.raises(ContractError):
            training.evaluate(model, empty)

    def test_threads_match_serial(self, cfg):
        pairs, vocab, graph = training.prepare_corpus(cfg)
        model = training.build_model(cfg, vocab, graph)
        dataset = build_datasets.build_train(cfg.dataset, vocab, mode='dev')
        serial = training.evaluate(model, dataset)
        threaded = training.evaluate(model, dataset, num_workers=3)
        assert serial == threaded

    def test_predictions_file(self, tmp_path):
        path = tmp_path / 'predictions.tsv'
        training.write_predictions(path, [('d01', 0.91234567, 'entail'), ('d02', 0.1, 'not_entail')])
        assert path.read_text(encoding='utf-8') == \
            'id\tp_entail\tlabel\nd01\t0.912346\tentail\nd02\t0.100000\tnot_entail\n'
