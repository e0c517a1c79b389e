import itertools

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from pcmt.errors import CapacityError, ParameterError
from pcmt.polar_fg import (
    build_full_fg,
    enumerate_stopping_sets,
    is_stopping_set,
    remove_bottom_rows,
    row_reduced_fg,
    stopping_tree,
    tree_leaf_sizes,
)


def kron_generator(N: int) -> np.ndarray:
    g = np.array([[1]], dtype=np.uint8)
    for _ in range(N.bit_length() - 1):
        g = np.kron(g, np.array([[1, 0], [1, 1]], dtype=np.uint8))
    return g


@pytest.mark.parametrize("N", [2, 4, 8, 16])
def test_graph_counts(N):
    fg = build_full_fg(N)
    n = N.bit_length() - 1
    assert len(fg.vns) == N * (n + 1)
    assert len(fg.cns) == N * n
    assert sorted(fg.vns) == list(range(1, len(fg.vns) + 1))
    degrees = [c.degree for c in fg.cns.values()]
    assert degrees.count(3) == degrees.count(2) == N * n // 2


@pytest.mark.parametrize("N", [2, 4, 8, 16])
def test_encoding_matches_kronecker_transform(N):
    # peeling from the leftmost column must reproduce u @ G_N over GF(2)
    from pcmt.erasure_codec import peel

    fg = build_full_fg(N)
    rng = np.random.default_rng(N)
    G = kron_generator(N)
    for _ in range(8):
        u = rng.integers(0, 2, N)
        known = {fg.vn_id(1, i): int(u[i - 1]) for i in range(1, N + 1)}
        values = peel(fg, known).values
        x = [values[fg.vn_id(fg.n_cols, i)] for i in range(1, N + 1)]
        assert x == (u @ G % 2).tolist()


def test_cn_membership_by_brute_force():
    fg = build_full_fg(8)
    for c in fg.cns.values():
        s = 1 << (c.col - 1)
        upper = ((c.row - 1) // s) % 2 == 0
        want = {fg.vn_id(c.col, c.row), fg.vn_id(c.col + 1, c.row)}
        if upper:
            want.add(fg.vn_id(c.col + 1, c.row + s))
        assert set(c.vns) == want


def test_leaf_sizes_are_kronecker_power():
    for N in (1, 2, 4, 8, 16, 64):
        ref = np.array([1])
        for _ in range(N.bit_length() - 1):
            ref = np.kron(ref, [1, 2])
        assert tree_leaf_sizes(N) == ref.tolist()
    assert len(tree_leaf_sizes(6)) == 8
    with pytest.raises(ParameterError):
        tree_leaf_sizes(0)


@given(st.integers(1, 5).map(lambda n: 1 << n), st.data())
def test_stopping_tree_is_stopping_set(N, data):
    fg = build_full_fg(N)
    i = data.draw(st.integers(1, N))
    tree = stopping_tree(fg, fg.vn_id(1, i))
    assert is_stopping_set(fg, tree.vn_ids)
    assert sum(fg.vns[v].col == 1 for v in tree.vn_ids) == 1
    assert len(tree.leaf_set) == 1 << bin(i - 1).count("1")


def test_stopping_tree_rejects_non_root():
    fg = build_full_fg(4)
    with pytest.raises(ParameterError):
        stopping_tree(fg, fg.vn_id(2, 1))


def test_stopping_trees_on_row_reduced_graphs():
    # removing bottom rows keeps every horizontal neighbour, so closure still works
    for n_rows in range(2, 9):
        fg = row_reduced_fg(8, n_rows)
        for i in range(1, n_rows + 1):
            tree = stopping_tree(fg, fg.vn_id(1, i))
            assert is_stopping_set(fg, tree.vn_ids)
            assert len(tree.leaf_set) <= 1 << bin(i - 1).count("1")


def test_enumeration_against_brute_force():
    fg = build_full_fg(4)
    ids = sorted(fg.vns)
    brute = set()
    for mask in range(1, 1 << len(ids)):
        members = [v for b, v in enumerate(ids) if mask >> b & 1]
        if is_stopping_set(fg, members):
            brute.add(frozenset(members))
    assert {s.vn_ids for s in enumerate_stopping_sets(fg)} == brute


def test_enumeration_guard():
    with pytest.raises(CapacityError):
        enumerate_stopping_sets(build_full_fg(16))


def test_empty_set_is_rejected():
    with pytest.raises(ParameterError):
        is_stopping_set(build_full_fg(2), [])


def test_bottom_row_removal_counts():
    g6 = remove_bottom_rows(build_full_fg(8), 2)
    assert len(g6.vns) == 24
    assert all(vn.row <= 6 for vn in g6.vns.values())
    assert all(len(c.vns) >= 1 for c in g6.cns.values())
    assert {vn.row for vn in g6.vns.values()} == set(range(1, 7))


def test_row_reduced_graph_has_no_dangling_edges():
    fg = row_reduced_fg(16, 11, frozen={1, 2})
    for c in fg.cns.values():
        assert all(v in fg.vns for v in c.vns)
    assert set(fg.frozen_ids) == {fg.vn_id(1, 1), fg.vn_id(1, 2)}


def test_json_round_trip_shape():
    import json

    doc = json.loads(build_full_fg(4).to_json())
    assert isinstance(doc, dict)


@settings(max_examples=30)
@given(st.integers(2, 32), st.data())
def test_row_reduced_nodes_have_valid_ids(n_rows, data):
    full = 1 << (n_rows - 1).bit_length()
    fg = row_reduced_fg(full, n_rows)
    for v, vn in fg.vns.items():
        assert v == fg.vn_id(vn.col, vn.row)
        assert 1 <= vn.row <= n_rows
    for c, cn in itertools.islice(fg.cns.items(), 50):
        assert all(fg.vns[v].col in (cn.col, cn.col + 1) for v in cn.vns)
