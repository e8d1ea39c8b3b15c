import json

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from projgraph.data import (
    Dataset, generate_sbm, homophily, load_dataset, make_splits, save_dataset, sbm_preset,
)
from projgraph.errors import ConfigError, DataError, DatasetParseError, SplitError


def _write(tmp_path, doc, name="d.json"):
    p = tmp_path / name
    p.write_text(json.dumps(doc) if not isinstance(doc, str) else doc)
    return p


def test_load_minimal_file(tmp_path):
    p = _write(tmp_path, {"name": "tiny", "n": 2, "n_classes": 2, "features": [[0.5], [1.0]],
                          "labels": [0, 1], "edges": None})
    ds = load_dataset(p)
    assert ds.n == 2 and ds.n_features == 1 and ds.edges is None and ds.adjacency() is None


def test_load_cora_shaped_metadata(tmp_path):
    n, f = 2708, 1433
    row = "[" + ",".join(["0"] * f) + "]"
    text = ('{"name": "cora-shape", "n": %d, "n_classes": 7, "features": [%s], "labels": [%s], "edges": []}'
            % (n, ",".join([row] * n), ",".join(str(i % 7) for i in range(n))))
    ds = load_dataset(_write(tmp_path, text))
    assert (ds.n, ds.n_features, ds.n_classes) == (2708, 1433, 7)


def test_self_loop_in_file_is_a_data_error(tmp_path):
    p = _write(tmp_path, {"name": "x", "n": 2, "n_classes": 1, "features": [[0.0], [0.0]],
                          "labels": [0, 0], "edges": [[0, 0]]})
    with pytest.raises(DataError, match="self-loop"):
        load_dataset(p)


def test_label_out_of_range(tmp_path):
    p = _write(tmp_path, {"name": "x", "n": 2, "n_classes": 2, "features": [[0.0], [0.0]],
                          "labels": [0, 2], "edges": None})
    with pytest.raises(DataError, match="node 1"):
        load_dataset(p)


@pytest.mark.parametrize("doc, field", [
    ({"n": 1, "n_classes": 1, "features": [[0.0]], "labels": [0]}, "name"),
    ({"name": "x", "n": "1", "n_classes": 1, "features": [[0.0]], "labels": [0]}, "n"),
    ({"name": "x", "n": 2, "n_classes": 1, "features": [[0.0], [0.0, 1.0]], "labels": [0, 0]}, "features"),
    ({"name": "x", "n": 1, "n_classes": 1, "features": [[0.0]], "labels": [0], "edges": [[0]]}, "edges"),
])
def test_schema_violations_name_the_field(tmp_path, doc, field):
    with pytest.raises(DatasetParseError, match=field):
        load_dataset(_write(tmp_path, doc))


def test_invalid_json_reports_line(tmp_path):
    with pytest.raises(DatasetParseError, match="line 2"):
        load_dataset(_write(tmp_path, '{"name": "x",\n  "n": }'))


def test_round_trip(tmp_path):
    ds = generate_sbm(30, 3, 0.3, 0.05, 5, 0.7, seed=2)
    save_dataset(ds, tmp_path / "g.json")
    back = load_dataset(tmp_path / "g.json")
    assert back.name == ds.name and back.n == ds.n and back.n_classes == ds.n_classes
    assert np.array_equal(back.labels, ds.labels)
    assert np.array_equal(back.edges, ds.edges)
    assert np.max(np.abs(back.features - ds.features)) <= 1e-12


def test_sbm_extremes():
    ds = generate_sbm(12, 3, 1.0, 0.0, 3, 0.0, seed=0)
    same = ds.labels[ds.edges[:, 0]] == ds.labels[ds.edges[:, 1]]
    assert same.all()
    assert len(ds.edges) == 3 * (4 * 3 // 2)
    assert np.array_equal(ds.features, np.eye(3)[ds.labels])


def test_sbm_equal_probabilities_give_chance_homophily():
    rates = [homophily(generate_sbm(150, 3, 0.2, 0.2, 3, 0.1, seed=s)) for s in range(5)]
    # 49 of every 149 partners share a node's class
    assert abs(np.mean(rates) - 49 / 149) < 0.02


def test_sbm_homophily_matches_edge_count_expectation():
    n, C, p_in, p_out = 300, 3, 0.1, 0.01
    ds = generate_sbm(n, C, p_in, p_out, 16, 0.5, seed=4)
    m = n // C
    pairs_in = C * m * (m - 1) // 2
    pairs_out = n * (n - 1) // 2 - pairs_in
    intra = int(np.sum(ds.labels[ds.edges[:, 0]] == ds.labels[ds.edges[:, 1]]))
    inter = len(ds.edges) - intra
    assert abs(intra - pairs_in * p_in) <= 3 * np.sqrt(pairs_in * p_in * (1 - p_in))
    assert abs(inter - pairs_out * p_out) <= 3 * np.sqrt(pairs_out * p_out * (1 - p_out))
    expected = pairs_in * p_in / (pairs_in * p_in + pairs_out * p_out)
    assert homophily(ds) == pytest.approx(expected, abs=0.08)


def test_sbm_intra_edge_count_over_twenty_seeds():
    n, C, p_in = 90, 3, 0.2
    m = n // C
    pairs_in = C * m * (m - 1) // 2
    counts = []
    for s in range(20):
        ds = generate_sbm(n, C, p_in, 0.05, 3, 0.1, seed=s)
        counts.append(int(np.sum(ds.labels[ds.edges[:, 0]] == ds.labels[ds.edges[:, 1]])))
    sigma = np.sqrt(20 * pairs_in * p_in * (1 - p_in))
    assert abs(sum(counts) - 20 * pairs_in * p_in) <= 3 * sigma


def test_sbm_deterministic_and_validated():
    a, b = generate_sbm(40, 2, 0.3, 0.1, 4, 0.5, seed=3), generate_sbm(40, 2, 0.3, 0.1, 4, 0.5, seed=3)
    assert np.array_equal(a.edges, b.edges) and np.array_equal(a.features, b.features)
    for bad in (dict(p_in=2.0), dict(p_out=-0.1), dict(p_in=float("nan"))):
        kw = dict(n=10, n_classes=2, p_in=0.5, p_out=0.1, feature_dim=2, noise=0.1, seed=0) | bad
        with pytest.raises(ConfigError):
            generate_sbm(**kw)


def test_presets():
    ds = sbm_preset("heterophilic")
    assert ds.n == 300 and ds.n_classes == 3 and ds.n_features == 16
    assert homophily(ds) < 0.3 < homophily(sbm_preset("homophilic"))
    with pytest.raises(ConfigError):
        sbm_preset("cora")


def test_split_examples():
    labels = np.arange(10) % 2
    assert make_splits(10, (1, 0, 0), labels, 0).sizes() == (10, 0, 0)
    assert make_splits(10, (0.6, 0.2, 0.2), labels, 0).sizes() == (6, 2, 2)
    a = make_splits(50, (0.6, 0.2, 0.2), np.arange(50) % 3, 0)
    b = make_splits(50, (0.6, 0.2, 0.2), np.arange(50) % 3, 1)
    assert a.sizes() == b.sizes()
    assert not np.array_equal(a.roles, b.roles)


def test_split_rejects_bad_fractions():
    with pytest.raises(ConfigError):
        make_splits(10, (0.5, 0.2, 0.2), np.zeros(10), 0)


@settings(max_examples=50, deadline=None)
@given(n=st.integers(3, 80), C=st.integers(1, 5), seed=st.integers(0, 1000),
       f=st.sampled_from([(0.6, 0.2, 0.2), (0.5, 0.25, 0.25), (0.1, 0.1, 0.8), (0.34, 0.33, 0.33)]))
def test_splits_partition_and_cover_classes(n, C, seed, f):
    labels = np.arange(n) % C
    s = make_splits(n, f, labels, seed)
    assert np.all(s.train.astype(int) + s.val + s.test == 1)
    assert sum(s.sizes()) == n
    n_train = s.sizes()[0]
    if n_train >= C:
        assert set(labels[s.train]) == set(range(C))
    assert make_splits(n, f, labels, seed).roles.tobytes() == s.roles.tobytes()


def test_dataset_validates_features():
    with pytest.raises(DataError):
        Dataset("x", 2, 2, np.array([[np.nan], [0.0]]), np.array([0, 1]))
    with pytest.raises(DataError):
        Dataset("x", 2, 2, np.zeros((2, 1)), np.array([0, 1]), np.array([[0, 5]]))


def test_split_error_type_exists():
    assert issubclass(SplitError, ValueError)
