"""
Qualitative error analysis: a seeded sample of pairs with their recognized
mentions, prediction and whether the prediction was wrong.
"""
from .datasets.rqe_data import LABELS
from .models.aggregator import decide
from .utils.autodiff import counter_rng


def sample_indices(n_items, n_samples, seed):
    if n_samples >= n_items:
        return list(range(n_items))
    rng = counter_rng(seed, 'analysis')
    return sorted(int(i) for i in rng.choice(n_items, size=n_samples, replace=False))


def analyze(model, dataset, n_samples=50, seed=0, threshold=0.5):
    model.eval()
    records = []
    for index in sample_indices(len(dataset), n_samples, seed):
        sample = dataset[index]
        pair = sample['pair']
        p_entail = model.predict_proba(sample)
        predicted = LABELS[decide(p_entail, threshold)]
        record = {
            'id': pair.id,
            'premise': pair.premise,
            'hypothesis': pair.hypothesis,
            'gold': pair.label,
            'predicted': predicted,
            'p_entail': round(p_entail, 6),
            'mispredicted': pair.label is not None and pair.label != predicted,
        }
        if model.use_graph:
            inputs = model.graph_inputs(pair)
            record['mentions'] = [{'entity': m.entity_id, 'surface': m.surface, 'source': m.source,
                                   'span': [m.start, m.end]} for m in inputs.mentions]
            record['expanded_nodes'] = inputs.added_nodes
        records.append(record)
    return records


def summarize(records):
    labeled = [r for r in records if r['gold'] is not None]
    wrong = [r for r in labeled if r['mispredicted']]
    return {'samples': len(records), 'labeled': len(labeled), 'mispredicted': len(wrong)}
