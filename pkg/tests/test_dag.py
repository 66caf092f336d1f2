import json

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from conftest import chain, explicit_dag, is_acyclic
from d2c.dag import (
    ConfigError,
    Dag,
    Dataset,
    PairSamplingError,
    hide_variables,
    load_dataset,
    sample_dag,
    sample_pairs,
    save_dataset,
    simulate,
)


def test_small_size_class_interval():
    dag = sample_dag("small", seed=7)
    assert 20 <= dag.n_nodes <= 30


@pytest.mark.parametrize("size_class,lo,hi", [("medium", 100, 200), ("large", 500, 1000)])
def test_other_size_classes(size_class, lo, hi):
    assert lo <= sample_dag(size_class, max_parents=2, seed=3).n_nodes <= hi


def test_single_node():
    dag = sample_dag(n=1, seed=0)
    assert dag.n_nodes == 1 and dag.edges == ()


def test_three_node_graphs_acyclic_over_1000_seeds():
    for seed in range(1000):
        dag = sample_dag(n=3, max_parents=2, seed=seed)
        assert is_acyclic(3, dag.edges)
        assert all(p != c for p, c in dag.edges)


@settings(max_examples=60, deadline=None)
@given(
    n=st.integers(1, 40),
    max_parents=st.integers(1, 5),
    dep=st.sampled_from(["linear", "quadratic", "sigmoid", "mixed"]),
    seed=st.integers(0, 2**64 - 1),
)
def test_sampled_dags_are_valid(n, max_parents, dep, seed):
    dag = sample_dag(n=n, max_parents=max_parents, dep_type=dep, seed=seed)
    assert is_acyclic(n, dag.edges)
    for v in range(n):
        assert len(dag.parents(v)) <= max_parents
    for e in dag.edges:
        a = np.abs(dag.coeffs[e])
        assert np.all((a >= 0.3) & (a <= 1.0))
    assert all(0.2 <= s <= 1.0 for s in dag.noise_sigma)


def test_invalid_size_interval():
    with pytest.raises(ConfigError):
        sample_dag(n_range=(30, 20), seed=0)
    with pytest.raises(ConfigError):
        sample_dag(n=5, max_parents=0)


def test_dag_rejects_cycles_and_bad_coefficients():
    with pytest.raises(ConfigError):
        Dag(2, ((1, 0),), {(1, 0): "linear"}, {(1, 0): (0.0, 1.0)}, (1.0, 1.0), (0, 1))
    with pytest.raises(ConfigError):
        Dag(2, ((0, 1),), {(0, 1): "quadratic"}, {(0, 1): (0.0, 1.0)}, (1.0, 1.0), (0, 1))
    with pytest.raises(ConfigError):
        Dag(2, (), {}, {}, (1.0, 0.0), (0, 1))


def test_reproducible():
    a, b = sample_dag(seed=99, dep_type="mixed"), sample_dag(seed=99, dep_type="mixed")
    assert a == b
    assert simulate(a, 200, seed=4) == simulate(b, 200, seed=4)
    assert np.array_equal(simulate(a, 50, 4).observations, simulate(b, 50, 4).observations)


def test_no_edges_gives_uncorrelated_columns():
    dag = explicit_dag(6, [], sigma=1.0)
    X = simulate(dag, 5000, seed=1).observations
    C = np.corrcoef(X.T)
    off = C[~np.eye(6, dtype=bool)]
    assert np.all(np.abs(off) < 0.05)


def test_single_linear_edge_correlates():
    dag = explicit_dag(2, [(0, 1)], coef=0.5, sigma=1.0)
    X = simulate(dag, 1000, seed=2).observations
    r = np.corrcoef(X.T)[0, 1]
    # analytic rho = 0.5 / sqrt(0.25 + 1) ~ 0.447; the 3-sigma null band at N=1000 is ~0.095
    assert abs(r - 0.5 / np.sqrt(1.25)) < 0.1
    assert abs(r) > 3 / np.sqrt(1000)


def test_one_row():
    ds = simulate(chain(3), 1, seed=0)
    assert ds.observations.shape == (1, 3)


def test_zero_noise_linear_fidelity():
    dag = explicit_dag(4, [(0, 2), (1, 2), (2, 3)], coef=0.7, sigma=1e-6)
    X = simulate(dag, 500, seed=3).observations

    def std(v):
        v = v - v.mean()
        return v / v.std()

    expected2 = std(0.7 * X[:, 0] + 0.7 * X[:, 1])
    expected3 = std(0.7 * X[:, 2])
    assert np.allclose(X[:, 2], expected2, rtol=1e-4, atol=1e-4)
    assert np.allclose(X[:, 3], expected3, rtol=1e-4, atol=1e-4)


@pytest.mark.parametrize("dep", ["quadratic", "sigmoid", "mixed"])
def test_nonlinear_simulation_is_finite_and_standardized(dep):
    dag = sample_dag("small", dep_type=dep, seed=8)
    X = simulate(dag, 300, seed=8).observations
    assert np.all(np.isfinite(X))
    assert np.allclose(X.mean(axis=0), 0, atol=1e-10)
    assert np.allclose(X.std(axis=0), 1, atol=1e-10)


def test_hide_zero_fraction_is_identity():
    ds = simulate(chain(5), 30, seed=0)
    out = hide_variables(ds, 0.0, seed=1)
    assert out == ds and out.hidden_ids == ()


def test_hide_five_percent_of_twenty():
    dag = sample_dag(n=20, seed=1)
    out = hide_variables(simulate(dag, 30, 1), 0.05, seed=2)
    assert len(out.hidden_ids) == 1 and len(out.column_ids) == 19


@pytest.mark.parametrize("seed", range(20))
def test_hide_respects_protected(seed):
    ds = simulate(sample_dag(n=20, seed=seed), 25, seed)
    out = hide_variables(ds, 0.5, protected={3, 7}, seed=seed)
    assert 3 in out.column_ids and 7 in out.column_ids


def test_hide_everything_is_an_error():
    ds = simulate(sample_dag(n=20, seed=0), 25, 0)
    with pytest.raises(ConfigError, match="cannot hide all columns"):
        hide_variables(ds, 0.99, seed=0)
    with pytest.raises(ConfigError):
        hide_variables(ds, 1.0)


@settings(max_examples=50, deadline=None)
@given(n=st.integers(2, 30), fraction=st.floats(0, 0.9), seed=st.integers(0, 10**6))
def test_hidden_bookkeeping(n, fraction, seed):
    ds = simulate(sample_dag(n=n, seed=seed), 5, seed)
    try:
        out = hide_variables(ds, fraction, seed=seed)
    except ConfigError:
        return
    assert set(out.column_ids) | set(out.hidden_ids) == set(range(n))
    assert not set(out.column_ids) & set(out.hidden_ids)
    assert len(out.hidden_ids) == int(np.floor(fraction * n))


def test_pairs_two_node_graph():
    dag = chain(2)
    ds = simulate(dag, 30, 0)
    pairs = sample_pairs(dag, ds, 1, 0, seed=0)
    assert [(p.i, p.j, p.label) for p in pairs] == [(0, 1, True)]


def test_pairs_counts_and_labels():
    dag = sample_dag("small", seed=4)
    ds = simulate(dag, 50, 4)
    pairs = sample_pairs(dag, ds, 4, 6, seed=4)
    assert len(pairs) == 10 and sum(p.label for p in pairs) == 4
    for p in pairs:
        assert p.label == dag.has_edge(p.i, p.j)
        assert p.i in ds.column_ids and p.j in ds.column_ids
    assert len({(p.i, p.j) for p in pairs}) == 10


def test_chain_reverse_pair_is_negative():
    dag = chain(3)
    ds = simulate(dag, 30, 0)
    pairs = sample_pairs(dag, ds, 1, 4, seed=0)
    negs = {(p.i, p.j): p.label for p in pairs if not p.label}
    # two reversed edges and the two non-adjacent pairs exhaust the negatives
    assert negs == {(1, 0): False, (2, 1): False, (0, 2): False, (2, 0): False}


def test_pairs_shortfall_is_reported():
    dag = chain(3)
    ds = simulate(dag, 30, 0)
    with pytest.raises(PairSamplingError, match="only 2 edges"):
        sample_pairs(dag, ds, 3, 1, seed=0)


def test_pairs_ignore_hidden_nodes():
    dag = sample_dag("small", seed=12)
    ds = hide_variables(simulate(dag, 40, 12), 0.2, seed=12)
    for p in sample_pairs(dag, ds, 2, 2, seed=1):
        assert p.i not in ds.hidden_ids and p.j not in ds.hidden_ids


def test_csv_round_trip(tmp_path):
    dag = sample_dag("small", dep_type="mixed", seed=21)
    ds = hide_variables(simulate(dag, 40, 21), 0.05, seed=21)
    sidecar = save_dataset(ds, dag, tmp_path / "d.csv")
    ds2, dag2 = load_dataset(tmp_path / "d.csv")
    assert ds2 == ds and dag2 == dag
    side = json.loads(sidecar.read_text())
    assert side["hidden_ids"] == list(ds.hidden_ids)
    assert len(side["dag"]["edges"]) == len(side["dag"]["func_forms"]) == len(dag.edges)
    header = (tmp_path / "d.csv").read_text().splitlines()[0].split(",")
    assert [int(h) for h in header] == list(ds.column_ids)


def test_dataset_rejects_missing_values():
    with pytest.raises(ValueError):
        Dataset(np.array([[1.0, np.nan]]), (0, 1))
