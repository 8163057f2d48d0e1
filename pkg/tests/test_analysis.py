from hypothesis import given, strategies as st

from lib.analysis import sample_indices, summarize


@given(st.integers(0, 200), st.integers(0, 60), st.integers(0, 5))
def test_sample_indices(n_items, n_samples, seed):
    picked = sample_indices(n_items, n_samples, seed)
    assert picked == sorted(set(picked))
    assert len(picked) == min(n_items, n_samples)
    assert all(0 <= i < n_items for i in picked)
    assert picked == sample_indices(n_items, n_samples, seed)


def test_summarize():
    records = [{'gold': 'entail', 'mispredicted': False}, {'gold': 'entail', 'mispredicted': True},
               {'gold': None, 'mispredicted': False}]
    assert summarize(records) == {'samples': 3, 'labeled': 2, 'mispredicted': 1}
