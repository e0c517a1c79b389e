"""Polar encoding factor graphs.

A graph for length ``N = 2**n`` has ``n + 1`` columns of variable nodes (VNs)
and ``n`` columns of check nodes (CNs).  Column 1 holds the input symbols
``u`` and column ``n + 1`` the coded symbols ``x``.  VN and CN ids follow
``(m - 1) * N + i`` for column ``m`` and row ``i`` (both 1-based).

At CN column ``m`` the span is ``s = 2**(m - 1)``.  Row ``i`` is an upper row
when ``((i - 1) // s) % 2 == 0``; its CN joins ``v[(m-1)N+i]``, ``v[mN+i]`` and
the slanted ``v[mN+i+s]``.  Lower rows get a degree-2 CN joining
``v[(m-1)N+i]`` and ``v[mN+i]``.  Every CN constraint is "XOR of members is
zero".

Row-reduced and pruned graphs keep the ids of the full graph they came from;
``FactorGraph.index_of`` gives the dense ascending index used for layout.
"""
from __future__ import annotations

import json
from dataclasses import dataclass, field, replace
from functools import cached_property
from typing import Iterable, Mapping

from .errors import CapacityError, ParameterError, StructuralError

DATA, PARITY, FROZEN, DROPPED = "data", "parity", "frozen", "dropped"


def is_power_of_two(n: int) -> bool:
    return n >= 1 and n & (n - 1) == 0


def ceil_log2(n: int) -> int:
    return (n - 1).bit_length()


@dataclass(frozen=True)
class VariableNode:
    id: int
    col: int
    row: int


@dataclass(frozen=True)
class CheckNode:
    id: int
    col: int
    row: int
    vns: tuple[int, ...]

    @property
    def degree(self) -> int:
        return len(self.vns)


@dataclass(frozen=True, eq=False)
class FactorGraph:
    """Immutable bipartite VN/CN graph derived from the polar graph of ``full_length``.

    ``n_rows`` is the number of rows still present (the code length).  Rows in
    ``frozen`` are frozen inputs; the rightmost VNs of information rows carry
    data, those of frozen rows carry parity, and every other VN is dropped.
    """

    full_length: int
    n_rows: int
    vns: Mapping[int, VariableNode] = field(repr=False)
    cns: Mapping[int, CheckNode] = field(repr=False)
    frozen: frozenset[int] = frozenset()
    pruned: bool = False
    # original id -> surviving id (None when the VN was eliminated as a zero)
    alias: Mapping[int, int | None] | None = field(default=None, repr=False)

    @property
    def n_cols(self) -> int:
        return self.full_length.bit_length()

    @property
    def info_rows(self) -> list[int]:
        return [i for i in range(1, self.n_rows + 1) if i not in self.frozen]

    def vn_id(self, col: int, row: int) -> int:
        return (col - 1) * self.full_length + row

    def role(self, vn_id: int) -> str:
        v = self.vns[vn_id]
        if v.col == self.n_cols:
            return PARITY if v.row in self.frozen else DATA
        if v.col == 1 and v.row in self.frozen:
            return FROZEN
        return DROPPED

    @cached_property
    def data_ids(self) -> tuple[int, ...]:
        last = self.n_cols
        return tuple(self.vn_id(last, i) for i in self.info_rows)

    @cached_property
    def parity_ids(self) -> tuple[int, ...]:
        last = self.n_cols
        return tuple(self.vn_id(last, i) for i in sorted(self.frozen))

    @cached_property
    def coded_vn_ids(self) -> tuple[int, ...]:
        """The ``n_rows`` non-dropped VNs: data rows first, then parity rows."""
        return self.data_ids + self.parity_ids

    @cached_property
    def frozen_ids(self) -> tuple[int, ...]:
        return tuple(v for v in sorted(self.vns) if self.role(v) == FROZEN)

    @cached_property
    def dropped_ids(self) -> tuple[int, ...]:
        coded = set(self.coded_vn_ids)
        return tuple(v for v in sorted(self.vns) if v not in coded)

    @cached_property
    def vn_cns(self) -> dict[int, tuple[int, ...]]:
        adj: dict[int, list[int]] = {v: [] for v in self.vns}
        for c in sorted(self.cns):
            for v in self.cns[c].vns:
                adj[v].append(c)
        return {v: tuple(cs) for v, cs in adj.items()}

    @cached_property
    def _dense(self) -> dict[int, int]:
        return {v: i for i, v in enumerate(sorted(self.vns), start=1)}

    def index_of(self, vn_id: int) -> int:
        """Dense 1-based index of a VN, ascending by original id."""
        return self._dense[vn_id]

    @property
    def n_edges(self) -> int:
        return sum(c.degree for c in self.cns.values())

    def with_frozen(self, frozen: Iterable[int]) -> FactorGraph:
        rows = frozenset(frozen)
        bad = [r for r in rows if not 1 <= r <= self.n_rows]
        if bad:
            raise ParameterError(f"frozen rows {sorted(bad)} outside [1, {self.n_rows}]")
        if self.pruned:
            raise ParameterError("cannot re-freeze a pruned graph")
        return replace(self, frozen=rows)

    def to_json(self) -> str:
        """Debug dump used for fixtures."""
        doc = {
            "full_length": self.full_length,
            "n_rows": self.n_rows,
            "frozen": sorted(self.frozen),
            "pruned": self.pruned,
            "vns": [[v, self.vns[v].col, self.vns[v].row, self.role(v)] for v in sorted(self.vns)],
            "cns": [[c, self.cns[c].col, self.cns[c].row, list(self.cns[c].vns)] for c in sorted(self.cns)],
        }
        return json.dumps(doc, separators=(",", ":"))


def build_full_fg(N: int) -> FactorGraph:
    """Factor graph ``G_N`` of ``F_2^{(x) n}`` for ``N = 2**n``, ``n >= 1``."""
    if N < 2 or not is_power_of_two(N):
        raise ParameterError(f"code length must be a power of two >= 2, got {N}")
    n = N.bit_length() - 1
    vns = {}
    for m in range(1, n + 2):
        for i in range(1, N + 1):
            lam = (m - 1) * N + i
            vns[lam] = VariableNode(lam, m, i)
    cns = {}
    for m in range(1, n + 1):
        s = 1 << (m - 1)
        for i in range(1, N + 1):
            z = (m - 1) * N + i
            members = ((m - 1) * N + i, m * N + i)
            if ((i - 1) // s) % 2 == 0:
                members += (m * N + i + s,)
            cns[z] = CheckNode(z, m, i, members)
    return FactorGraph(full_length=N, n_rows=N, vns=vns, cns=cns)


def tree_leaf_sizes(N: int) -> list[int]:
    """Kronecker power ``[1, 2]^{(x) ceil(log2 N)}`` as a list of length ``2**ceil(log2 N)``.

    Entry ``i`` (1-based) equals ``2**popcount(i - 1)``.
    """
    if N < 1:
        raise ParameterError(f"N must be positive, got {N}")
    return [1 << bin(i).count("1") for i in range(1 << ceil_log2(N))]


@dataclass(frozen=True)
class StoppingSet:
    vn_ids: frozenset[int]
    leaf_set: frozenset[int]

    @classmethod
    def of(cls, fg: FactorGraph, vn_ids: Iterable[int]) -> StoppingSet:
        ids = frozenset(vn_ids)
        last = fg.n_cols
        return cls(ids, frozenset(v for v in ids if fg.vns[v].col == last))


def is_stopping_set(fg: FactorGraph, vn_ids: Iterable[int]) -> bool:
    members = set(vn_ids)
    if not members:
        raise ParameterError("the empty set is not treated as a stopping set")
    touched = {c for v in members for c in fg.vn_cns[v]}
    return all(sum(v in members for v in fg.cns[c].vns) >= 2 for c in touched)


def stopping_tree(fg: FactorGraph, root: int) -> StoppingSet:
    """Rightward closure from a leftmost-column VN.

    Any CN left with a single member receives its horizontal right neighbour.
    Only meaningful on unpruned (full or row-reduced) graphs.
    """
    if root not in fg.vns or fg.vns[root].col != 1:
        raise ParameterError(f"v{root} is not a leftmost-column VN")
    members = {root}
    pending = list(fg.vn_cns[root])
    while pending:
        c = fg.cns[pending.pop()]
        inside = [v for v in c.vns if v in members]
        if len(inside) != 1:
            continue
        right = c.col * fg.full_length + c.row
        if right not in c.vns or right in members:
            raise StructuralError(f"stopping tree from v{root} would need to grow left at c{c.id}")
        members.add(right)
        pending.extend(fg.vn_cns[right])
    return StoppingSet.of(fg, members)


def enumerate_stopping_sets(
    fg: FactorGraph, exclude_frozen_roots: bool = False, max_vns: int = 32
) -> list[StoppingSet]:
    """All non-empty stopping sets, by exhaustive search with constraint propagation.

    A CN is violated exactly when it holds one member, so a partial assignment
    is extended only while no CN can end up with a single member.  With
    ``exclude_frozen_roots`` the frozen leftmost VNs are forced out, giving the
    sets that can stall a decoder which knows the frozen symbols.
    """
    if len(fg.vns) > max_vns:
        raise CapacityError(f"{len(fg.vns)} VNs exceeds the enumeration guard of {max_vns}")
    order = sorted(fg.vns, key=lambda v: (fg.vns[v].row, fg.vns[v].col))
    cn_members = {c: fg.cns[c].vns for c in fg.cns}
    vn_cns = fg.vn_cns
    state: dict[int, bool] = {}
    included = {c: 0 for c in fg.cns}
    open_ = {c: len(cn_members[c]) for c in fg.cns}
    results: list[StoppingSet] = []

    def assign(v: int, value: bool, trail: list[int]) -> bool:
        stack = [(v, value)]
        while stack:
            u, val = stack.pop()
            if u in state:
                if state[u] != val:
                    return False
                continue
            state[u] = val
            trail.append(u)
            for c in vn_cns[u]:
                open_[c] -= 1
                if val:
                    included[c] += 1
                inc, rem = included[c], open_[c]
                if inc == 1 and rem == 0:
                    return False
                if rem == 1 and inc <= 1:
                    # the last open member must keep the count away from one
                    last = next(w for w in cn_members[c] if w not in state)
                    stack.append((last, inc == 1))
        return True

    def undo(trail: list[int]) -> None:
        for u in reversed(trail):
            val = state.pop(u)
            for c in vn_cns[u]:
                open_[c] += 1
                if val:
                    included[c] -= 1

    def search(pos: int) -> None:
        while pos < len(order) and order[pos] in state:
            pos += 1
        if pos == len(order):
            chosen = [u for u, val in state.items() if val]
            if chosen:
                results.append(StoppingSet.of(fg, chosen))
            return
        v = order[pos]
        for value in (False, True):
            trail: list[int] = []
            if assign(v, value, trail):
                search(pos + 1)
            undo(trail)

    base: list[int] = []
    if exclude_frozen_roots:
        for v in fg.frozen_ids:
            if not assign(v, False, base):
                return []
    search(0)
    return results


def remove_bottom_rows(fg: FactorGraph, delta: int) -> FactorGraph:
    """Drop every VN in the bottom ``delta`` rows along with edges and emptied CNs."""
    if fg.pruned:
        raise ParameterError("row removal applies to unpruned graphs only")
    if not 0 <= delta < fg.n_rows:
        raise ParameterError(f"cannot remove {delta} of {fg.n_rows} rows")
    if delta == 0:
        return fg
    keep = fg.n_rows - delta
    vns = {v: node for v, node in fg.vns.items() if node.row <= keep}
    cns = {}
    for c, node in fg.cns.items():
        members = tuple(v for v in node.vns if v in vns)
        if members:
            cns[c] = CheckNode(c, node.col, node.row, members)
    frozen = frozenset(r for r in fg.frozen if r <= keep)
    return FactorGraph(fg.full_length, keep, vns, cns, frozen)


def row_reduced_fg(full_length: int, n_rows: int, frozen: Iterable[int] = ()) -> FactorGraph:
    """``G_full`` with every row below ``n_rows`` removed, frozen rows marked."""
    fg = build_full_fg(full_length)
    return remove_bottom_rows(fg, full_length - n_rows).with_frozen(frozen)
