from lib import trainer as training
from lib.datasets import build_datasets
from lib.utils.config import get_cfg_defaults, update_cfg

if __name__ == '__main__':
    cfg = update_cfg(get_cfg_defaults(), 'configs/exp/semkgn_toy.yml')
    pairs, vocab, graph = training.prepare_corpus(cfg)
    model = training.build_model(cfg, vocab, graph).eval()
    dataset = build_datasets.build_train(cfg.dataset, vocab, mode='train', pairs=pairs[:4])
    sample = dataset[0]
    inputs = model.graph_inputs(sample['pair'])
    print(graph.node_count, len(graph))  # vocabulary graph nodes and edges
    print(inputs.propagated.values.shape, inputs.node_count)  # compact M A_hat and expanded graph size
    print(model(sample).shape)  # Should be (1, 2)
    print(model.loss([dataset[i] for i in range(len(dataset))]).item())
