import argparse
import os
import sys

import numpy as np
from loguru import logger

sys.path.insert(0, os.path.abspath(os.path.dirname(__file__)))
from lib import ablation, analysis
from lib import trainer as training
from lib.datasets import build_datasets
from lib.datasets.vocab import save_vocabulary
from lib.graphs import knowledge
from lib.graphs.cooccurrence import save_graph
from lib.utils import autodiff as ad
from lib.utils import util
from lib.utils.config import get_cfg_defaults, update_cfg, validate_cfg
from lib.utils.errors import SemKGNError, UsageError

GRADCHECK_TOLERANCE = 1e-4

# flag -> config key
FLAG_KEYS = {
    'seed': 'seed',
    'train_path': 'dataset.train_path',
    'dev_path': 'dataset.dev_path',
    'test_path': 'dataset.test_path',
    'kb_path': 'dataset.kb_path',
    'max_dict_size': 'dataset.max_dict_size',
    'threshold': 'graph.npmi_threshold',
    'window_size': 'graph.window_size',
    'hops': 'graph.hops',
    'epochs': 'train.epochs',
    'lr': 'train.lr',
    'batch_size': 'train.batch_size',
    'split': 'eval.split',
    'samples': 'eval.analysis_samples',
    'num_workers': 'eval.num_workers',
}


def load_cfg(args):
    cfg = get_cfg_defaults()
    for path in (args.cfg, args.data_cfg):
        if not path:
            continue
        if not os.path.exists(path):
            raise UsageError(f'config file not found: {path}')
        cfg = update_cfg(cfg, path)
    if args.opts:
        try:
            cfg.merge_from_list(args.opts)
        except (AssertionError, KeyError, ValueError) as e:
            raise UsageError(f'bad override {args.opts}: {e}')
    overrides = []
    for flag, key in FLAG_KEYS.items():
        value = getattr(args, flag, None)
        if value is not None:
            overrides += [key, value]
    if overrides:
        cfg.merge_from_list(overrides)
    if args.output_dir:
        cfg.output_dir = args.output_dir
    if not cfg.output_dir:
        cfg.output_dir = os.path.join('exps', cfg.group, cfg.exp_name or 'semkgn')
    if cfg.exp_name is None:
        cfg.exp_name = os.path.basename(os.path.normpath(cfg.output_dir))
    for key in ('train_path', 'dev_path', 'test_path', 'kb_path'):
        if cfg.dataset[key]:
            cfg.dataset[key] = os.path.abspath(cfg.dataset[key])
    validate_cfg(cfg)
    os.makedirs(cfg.output_dir, exist_ok=True)
    util.dump_cfg(cfg, os.path.join(cfg.output_dir, 'full_config.yaml'))
    return cfg


def eval_dataset(cfg, vocab, split):
    return build_datasets.build_train(cfg.dataset, vocab, mode=split)


# ---------------------------------------------------------------------------- #
# subcommands
# ---------------------------------------------------------------------------- #
def cmd_build_vocab(cfg, args):
    _, vocab, _ = training.prepare_corpus(cfg, with_graph=False)
    path = os.path.join(cfg.output_dir, training.VOCAB_FILE)
    save_vocabulary(vocab, path)
    print(f'vocabulary of {vocab.size} tokens written to {path}')
    return 0


def cmd_build_graph(cfg, args):
    _, vocab, graph = training.prepare_corpus(cfg, with_graph=True)
    save_vocabulary(vocab, os.path.join(cfg.output_dir, training.VOCAB_FILE))
    path = os.path.join(cfg.output_dir, training.GRAPH_FILE)
    save_graph(graph, path)
    print(f'graph with {graph.node_count} nodes and {len(graph)} edges written to {path}')
    return 0


def cmd_expand_graph(cfg, args):
    _, vocab, graph = training.prepare_corpus(cfg, with_graph=True)
    kb, _ = training.load_resources(cfg)
    if kb is None:
        raise UsageError('expand-graph needs dataset.kb_path')
    pairs = build_datasets.load_split(cfg.dataset, mode=cfg.eval.split)
    if args.pair_id:
        pairs = [p for p in pairs if p.id == args.pair_id]
        if not pairs:
            raise UsageError(f'pair {args.pair_id!r} not found in the {cfg.eval.split} split')
    relations = knowledge.parse_relations(list(cfg.graph.relations))
    summary = []
    for pair in pairs:
        mentions = knowledge.recognize_entities(pair, kb)
        g = knowledge.expand_graph(graph, kb, mentions, vocab, hops=cfg.graph.hops, relations=relations)
        summary.append({
            'id': pair.id,
            'mentions': [{'entity': m.entity_id, 'surface': m.surface, 'source': m.source,
                          'span': [m.start, m.end]} for m in mentions],
            'nodes': g.node_count,
            'added_nodes': list(g.added_nodes),
            'added_edges': [[i, j, w, tag] for i, j, w, tag in g.added_edges],
        })
    path = os.path.join(cfg.output_dir, 'expanded.yaml')
    util.dump_yaml(summary, path)
    print(f'expanded graphs of {len(summary)} pairs written to {path}')
    return 0


def cmd_train(cfg, args):
    trainer = training.Trainer(config=cfg)
    trainer.fit()
    print(f'best epoch {trainer.best_epoch}; artifacts in {cfg.output_dir}')
    return 0


def cmd_eval(cfg, args):
    model = training.load_trained(cfg, args.model_dir)
    dataset = eval_dataset(cfg, model.vocab, cfg.eval.split)
    metrics, rows = training.evaluate(model, dataset, threshold=cfg.eval.threshold,
                                      num_workers=cfg.eval.num_workers)
    path = os.path.join(cfg.output_dir, training.METRICS_FILE)
    training.write_metrics(path, metrics, cfg.eval.split)
    training.write_predictions(os.path.join(cfg.output_dir, 'predictions.tsv'), rows)
    print(f'accuracy {metrics.accuracy:.2f} precision {metrics.precision:.2f} '
          f'recall {metrics.recall:.2f} f1 {metrics.f1:.2f} ({path})')
    return 0


def cmd_predict(cfg, args):
    model = training.load_trained(cfg, args.model_dir)
    if args.input:
        from lib.datasets.rqe_data import PairDataset, load_dataset
        if not os.path.exists(args.input):
            raise UsageError(f'input file not found: {args.input}')
        dataset = PairDataset(load_dataset(args.input, cfg.dataset.format), model.vocab, cfg.dataset, mode='predict')
    else:
        dataset = eval_dataset(cfg, model.vocab, cfg.eval.split)
    model.prepare(dataset.pairs)
    rows = []
    for i in range(len(dataset)):
        label, p_entail = model.predict(dataset[i], threshold=cfg.eval.threshold)
        rows.append((dataset.pairs[i].id, p_entail, training.LABELS[label]))
    path = os.path.join(cfg.output_dir, 'predictions.tsv')
    training.write_predictions(path, rows)
    print(f'{len(rows)} predictions written to {path}')
    return 0


def cmd_ablate(cfg, args):
    rows = ablation.run_ablation(cfg, split=cfg.eval.split)
    path = os.path.join(cfg.output_dir, 'ablation.tsv')
    ablation.write_report(path, rows, cfg.eval.split)
    print(ablation.format_report(rows, cfg.eval.split), end='')
    return 0


def cmd_analyze(cfg, args):
    model = training.load_trained(cfg, args.model_dir)
    dataset = eval_dataset(cfg, model.vocab, cfg.eval.split)
    records = analysis.analyze(model, dataset, n_samples=cfg.eval.analysis_samples, seed=cfg.seed,
                               threshold=cfg.eval.threshold)
    path = os.path.join(cfg.output_dir, 'analysis.yaml')
    util.dump_yaml({'summary': analysis.summarize(records), 'pairs': records}, path)
    print(f'{len(records)} analysed pairs written to {path}')
    return 0


def gradcheck(model, batch, coords=5, seed=0, eps=1e-6):
    """Max relative error of backward() against central differences over every parameter.

    The small step keeps the differences from straddling relu kinks.
    """
    model.train()
    worst, report = 0.0, []
    for name, p in model.named_parameters():
        model.zero_grad()
        rng = ad.counter_rng(seed, 'gradcheck', name)
        err = ad.finite_diff_check(lambda _: model.loss(batch, step=0), p, eps=eps, max_coords=coords, rng=rng)
        report.append((name, err))
        worst = max(worst, err)
    model.zero_grad()
    return worst, report


def cmd_gradcheck(cfg, args):
    pairs, vocab, graph = training.prepare_corpus(cfg)
    model = training.build_model(cfg, vocab, graph)
    dataset = build_datasets.build_train(cfg.dataset, vocab, mode='train', pairs=pairs[:args.pairs])
    batch = [dataset[i] for i in range(len(dataset))]
    worst, report = gradcheck(model, batch, coords=args.coords, seed=cfg.seed)
    for name, err in report:
        logger.info(f'{name}: {err:.3e}')
    print(f'max relative error {worst:.3e}')
    if not np.isfinite(worst) or worst >= GRADCHECK_TOLERANCE:
        logger.error(f'gradient check failed: {worst:.3e} >= {GRADCHECK_TOLERANCE}')
        return 1
    return 0


COMMANDS = {
    'build-vocab': cmd_build_vocab,
    'build-graph': cmd_build_graph,
    'expand-graph': cmd_expand_graph,
    'train': cmd_train,
    'eval': cmd_eval,
    'ablate': cmd_ablate,
    'gradcheck': cmd_gradcheck,
    'predict': cmd_predict,
    'analyze': cmd_analyze,
}


def build_parser():
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument('--cfg', type=str, default='configs/exp/semkgn_toy.yml', help='cfg file path')
    common.add_argument('--data_cfg', type=str, default=None, help='data cfg file path, merged after --cfg')
    common.add_argument('--output_dir', type=str, default=None, help='where artifacts are written')
    common.add_argument('--seed', type=int, default=None)
    common.add_argument('--train_path', type=str, default=None)
    common.add_argument('--dev_path', type=str, default=None)
    common.add_argument('--test_path', type=str, default=None)
    common.add_argument('--kb_path', type=str, default=None)
    common.add_argument('opts', nargs='*', help='KEY VALUE config overrides, e.g. train.lr 0.001')

    parser = argparse.ArgumentParser(description='Knowledge-enriched graph network for medical question entailment')
    sub = parser.add_subparsers(dest='command', required=True)

    p = sub.add_parser('build-vocab', parents=[common], help='build the dictionary from the training split')
    p.add_argument('--max_dict_size', type=int, default=None)
    p = sub.add_parser('build-graph', parents=[common], help='build the NPMI vocabulary graph')
    p.add_argument('--threshold', type=float, default=None)
    p.add_argument('--window_size', type=int, default=None)
    p = sub.add_parser('expand-graph', parents=[common], help='expand the graph with KB entities per pair')
    p.add_argument('--split', type=str, default=None)
    p.add_argument('--pair_id', type=str, default=None)
    p.add_argument('--hops', type=int, default=None)
    p = sub.add_parser('train', parents=[common], help='train Sem-KGN')
    p.add_argument('--epochs', type=int, default=None)
    p.add_argument('--lr', type=float, default=None)
    p.add_argument('--batch_size', type=int, default=None)
    for name, text in (('eval', 'evaluate a trained model'), ('predict', 'write per-pair predictions'),
                       ('analyze', 'dump a qualitative sample of predictions')):
        p = sub.add_parser(name, parents=[common], help=text)
        p.add_argument('--split', type=str, default=None)
        p.add_argument('--model_dir', type=str, default=None, help='training output dir (default: output_dir)')
        p.add_argument('--num_workers', type=int, default=None)
        if name == 'predict':
            p.add_argument('--input', type=str, default=None, help='pair TSV to predict (default: --split)')
        if name == 'analyze':
            p.add_argument('--samples', type=int, default=None)
    p = sub.add_parser('ablate', parents=[common], help='run the three-row ablation')
    p.add_argument('--split', type=str, default=None)
    p.add_argument('--epochs', type=int, default=None)
    p = sub.add_parser('gradcheck', parents=[common], help='finite-difference check of the full loss')
    p.add_argument('--pairs', type=int, default=2, help='batch size of the checked loss')
    p.add_argument('--coords', type=int, default=5, help='coordinates checked per parameter')
    return parser


def main(argv=None):
    args = build_parser().parse_args(argv)
    try:
        cfg = load_cfg(args)
        return COMMANDS[args.command](cfg, args)
    except (UsageError, FileNotFoundError) as e:
        logger.error(f'{args.command}: {e}')
        return 2
    except (SemKGNError, OSError) as e:
        logger.error(f'{args.command}: {e}')
        return 1


if __name__ == '__main__':
    sys.exit(main())
