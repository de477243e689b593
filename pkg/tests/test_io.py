import numpy as np
import pytest
from hypothesis import given, settings

from conftest import digraphs
from kcycle.decm import DecmParams
from kcycle.io import (
    EdgeListError,
    load_edge_list,
    load_forbidden,
    load_params,
    load_partition,
    save_edge_list,
    save_forbidden,
    save_params,
    save_partition,
)


@given(digraphs(max_n=6))
@settings(max_examples=40)
def test_edge_list_round_trip(tmp_path_factory, G):
    path = tmp_path_factory.mktemp("el") / "g.tsv"
    save_edge_list(G, path)
    H = load_edge_list(path)
    assert H == G
    assert all(H.weight(u, v) == w for u, v, w in G.edges())  # bit-exact


def test_header_fixes_n(tmp_path):
    p = tmp_path / "g.tsv"
    p.write_text("#n 5\n# a comment\n0\t1\t2.0\n")
    assert load_edge_list(p).n == 5
    p.write_text("0\t3\t2.0\n")
    assert load_edge_list(p).n == 4


@pytest.mark.parametrize(
    "text, fragment",
    [
        ("0\t0\t1.0\n", "forbidden"),
        ("0\t1\t-3\n", "positive"),
        ("0\t1\t0\n", "positive"),
        ("0\t1\n", "columns"),
        ("0\tx\t1.0\n", "node id"),
        ("#n 2\n0\t5\t1.0\n", "out of range"),
        ("0\t1\t1.0\n0\t1\t2.0\n", "duplicate"),
    ],
)
def test_malformed_lines(tmp_path, text, fragment):
    p = tmp_path / "bad.tsv"
    p.write_text("# header\n" + text)
    with pytest.raises(EdgeListError) as e:
        load_edge_list(p)
    assert fragment in str(e.value)
    assert e.value.lineno >= 2


def test_custom_forbidden(tmp_path):
    f = tmp_path / "f.tsv"
    save_forbidden({(0, 1)}, f)
    pairs = load_forbidden(f)
    assert pairs == {(0, 1)}
    g = tmp_path / "g.tsv"
    g.write_text("0\t0\t1.0\n1\t0\t2.0\n")
    G = load_edge_list(g, forbidden=pairs)
    assert G.weight(0, 0) == 1.0
    g.write_text("0\t1\t1.0\n")
    with pytest.raises(EdgeListError):
        load_edge_list(g, forbidden=pairs)


def test_partition_round_trip(tmp_path):
    p = tmp_path / "c.tsv"
    save_partition([0, 0, 1, 2, 1], p)
    assert load_partition(p).tolist() == [0, 0, 1, 2, 1]
    p.write_text("0\t0\n2\t1\n")
    with pytest.raises(ValueError):
        load_partition(p)


def test_params_round_trip(tmp_path):
    p = DecmParams(np.array([0.1, -2.0]), np.array([1.5, 0.0]), np.array([-1.0, -0.3]), np.array([-0.2, -1e-3]))
    save_params(p, tmp_path / "p.json")
    q = load_params(tmp_path / "p.json")
    for k in ("alpha", "beta", "phi", "psi"):
        assert np.array_equal(getattr(p, k), getattr(q, k))
