"""Frozen-set selection, row puncturing and factor-graph pruning."""
from __future__ import annotations

import json
from dataclasses import dataclass, field
from math import comb

from .errors import ParameterError
from .polar_fg import (
    DATA,
    PARITY,
    CheckNode,
    FactorGraph,
    build_full_fg,
    ceil_log2,
    is_power_of_two,
    remove_bottom_rows,
)


@dataclass(frozen=True)
class CodeDesign:
    """A frozen-set design and the graph it runs on.

    ``n_sef`` is the length chosen by the design algorithm.  ``fg.n_rows`` is
    the realized length, which can exceed ``n_sef`` when extra all-frozen
    bottom rows were retained (see ``retain_rows``).
    """

    n_target: int
    k: int
    n_sef: int
    fg: FactorGraph = field(repr=False)
    frozen: frozenset[int]
    alpha_min: int
    method: str = "sef"

    @property
    def n(self) -> int:
        return self.fg.n_rows

    @property
    def info(self) -> frozenset[int]:
        return frozenset(range(1, self.n + 1)) - self.frozen

    @property
    def pruned(self) -> bool:
        return self.fg.pruned

    def to_dict(self) -> dict:
        return {
            "N": self.n_target,
            "k": self.k,
            "N_SEF": self.n_sef,
            "frozen": sorted(self.frozen),
            "alpha_min": self.alpha_min,
            "pruned": self.pruned,
        }

    def to_json(self) -> str:
        return json.dumps(self.to_dict(), separators=(",", ":"))


def _check_lengths(N: int, k: int) -> None:
    if N < 2:
        raise ParameterError(f"code length must be at least 2, got {N}")
    if not 1 <= k < N:
        raise ParameterError(f"information length must satisfy 1 <= k < N, got k={k}, N={N}")


def _weights(count: int) -> list[int]:
    """popcount(i - 1) for i = 1..count, so the leaf-set size is ``1 << w``."""
    return [bin(i).count("1") for i in range(count)]


def _kth_smallest_weight(weights: list[int], kth: int, n_bits: int) -> int:
    # leaf-set sizes are powers of two, so bucketing by exponent replaces a sort
    counts = [0] * (n_bits + 1)
    for w in weights:
        counts[w] += 1
    seen = 0
    for w, c in enumerate(counts):
        seen += c
        if seen >= kth:
            return w
    raise AssertionError("kth exceeds the vector length")


def nf_design(N: int, k: int) -> CodeDesign:
    """Freeze the ``N - k`` rows with the smallest leaf-set sizes, lowest index first on ties."""
    _check_lengths(N, k)
    if not is_power_of_two(N):
        raise ParameterError(f"naive freezing needs a power-of-two length, got {N}")
    n_bits = N.bit_length() - 1
    weights = _weights(N)
    cut = _kth_smallest_weight(weights, N - k + 1, n_bits)
    frozen = [i for i, w in enumerate(weights, 1) if w < cut]
    for i, w in enumerate(weights, 1):
        if len(frozen) == N - k:
            break
        if w == cut:
            frozen.append(i)
    rows = frozenset(frozen)
    fg = build_full_fg(N).with_frozen(rows)
    return CodeDesign(N, k, N, fg, rows, 1 << cut, method="nf")


def sef_frozen_rows(N: int, k: int) -> tuple[frozenset[int], int]:
    """Frozen rows of an ``(N, k)`` code before puncturing, and the punctured length."""
    _check_lengths(N, k)
    n_bits = ceil_log2(N)
    weights = _weights(N)
    cut = _kth_smallest_weight(weights, N - k + 1, n_bits)
    frozen = [w < cut for w in weights]
    count = sum(frozen)
    i = N - 1
    while count < N - k:
        if not frozen[i]:
            frozen[i] = True
            count += 1
        i -= 1
    suffix = 0
    while suffix < N and frozen[N - 1 - suffix]:
        suffix += 1
    rows = frozenset(i for i, f in enumerate(frozen, 1) if f)
    return rows, N - suffix


def sef_design(N: int, k: int) -> CodeDesign:
    """Sampling-efficient freezing for any length ``N >= 2``.

    Rows whose leaf-set size is below the ``(N - k + 1)``-th smallest are
    frozen first, the rest of the frozen budget is taken from the bottom, and
    the frozen bottom suffix is punctured away together with the rows beyond
    ``N`` in the enclosing power-of-two graph.
    """
    rows, n_sef = sef_frozen_rows(N, k)
    full = 1 << ceil_log2(N)
    frozen = frozenset(r for r in rows if r <= n_sef)
    fg = remove_bottom_rows(build_full_fg(full), full - n_sef).with_frozen(frozen)
    alpha = min(1 << bin(i - 1).count("1") for i in range(1, n_sef + 1) if i not in frozen)
    return CodeDesign(N, k, n_sef, fg, frozen, alpha)


def retain_rows(design: CodeDesign, n_rows: int) -> CodeDesign:
    """Lengthen an unpruned design with frozen bottom rows.

    The added rows carry all-zero symbols in every column, so the threshold is
    unchanged; only the code length grows.  ``n_rows`` may reach the
    enclosing power of two.
    """
    fg = design.fg
    if fg.pruned:
        raise ParameterError("retain rows before pruning")
    if not design.n <= n_rows <= fg.full_length:
        raise ParameterError(f"cannot realize {n_rows} rows from a {fg.full_length}-row graph")
    if n_rows == design.n:
        return design
    frozen = design.frozen | frozenset(range(design.n + 1, n_rows + 1))
    base = build_full_fg(fg.full_length)
    new_fg = remove_bottom_rows(base, fg.full_length - n_rows).with_frozen(frozen)
    return CodeDesign(design.n_target, design.k, design.n_sef, new_fg, frozen, design.alpha_min, design.method)


def prune(fg: FactorGraph, frozen=None) -> FactorGraph:
    """Shrink a polar graph while keeping its peeling behaviour on coded symbols.

    Frozen VNs are removed once.  Then, until the VN plus CN count settles:
    a degree-1 CN on a dropped VN removes both (the VN is zero); a degree-2 CN
    merges its VNs when at least one is dropped, the survivor being the
    non-dropped VN or else the smaller id; empty CNs are removed.  Merging
    toggles membership, so a CN that held both merged VNs loses both.
    A degree-1 CN on a coded VN is kept, since that coded symbol is a zero
    that the decoder must still be able to recover.
    """
    if frozen is not None:
        fg = fg.with_frozen(frozen)
    if fg.pruned:
        return fg
    coded = set(fg.coded_vn_ids)
    vns = dict(fg.vns)
    members: dict[int, set[int]] = {c: set(node.vns) for c, node in fg.cns.items()}
    adj: dict[int, set[int]] = {v: set(cs) for v, cs in fg.vn_cns.items()}
    alias: dict[int, int | None] = {v: v for v in fg.vns}

    def remove_vn(v: int) -> None:
        for c in adj.pop(v):
            members[c].discard(v)
        del vns[v]

    for v in fg.frozen_ids:
        remove_vn(v)
        alias[v] = None

    def merge(gone: int, keep: int) -> None:
        for c in adj.pop(gone):
            members[c].discard(gone)
            if keep in members[c]:
                members[c].discard(keep)
                adj[keep].discard(c)
            else:
                members[c].add(keep)
                adj[keep].add(c)
        del vns[gone]
        alias[gone] = keep

    size = len(vns) + len(members)
    while True:
        for c in sorted(members):
            m = members[c]
            if len(m) == 1:
                (v,) = m
                if v not in coded:
                    remove_vn(v)
                    alias[v] = None
                    del members[c]
        for c in sorted(members):
            m = members.get(c)
            if m is None or len(m) != 2:
                continue
            a, b = sorted(m)
            a_coded, b_coded = a in coded, b in coded
            if a_coded and b_coded:
                continue
            if a_coded:
                merge(b, a)
            elif b_coded:
                merge(a, b)
            else:
                merge(b, a)
        for c in [c for c, m in members.items() if not m]:
            del members[c]
        new_size = len(vns) + len(members)
        if new_size == size:
            break
        size = new_size

    def resolve(v: int) -> int | None:
        while v is not None and alias[v] != v:
            v = alias[v]
        return v

    cns = {c: CheckNode(c, fg.cns[c].col, fg.cns[c].row, tuple(sorted(m))) for c, m in members.items()}
    return FactorGraph(
        fg.full_length,
        fg.n_rows,
        vns,
        cns,
        fg.frozen,
        pruned=True,
        alias={v: resolve(v) for v in alias},
    )


def prune_design(design: CodeDesign) -> CodeDesign:
    return CodeDesign(
        design.n_target, design.k, design.n_sef, prune(design.fg), design.frozen, design.alpha_min, design.method
    )


def tot_vn(fg: FactorGraph) -> int:
    return len(fg.vns)


def threshold_lower_bound(N: int, K: int) -> int:
    """``2**q`` for the largest ``q <= ceil(log2 N)`` whose lower binomial tail fits in ``N - K``."""
    if not 1 <= K < N:
        raise ParameterError(f"need 1 <= K < N, got K={K}, N={N}")
    n = ceil_log2(N)
    best, tail = 0, 0
    for q in range(n + 1):
        if tail > N - K:
            break
        best = q
        tail += comb(n, q)
    return 1 << best


__all__ = [
    "CodeDesign",
    "nf_design",
    "sef_design",
    "sef_frozen_rows",
    "retain_rows",
    "prune",
    "prune_design",
    "tot_vn",
    "threshold_lower_bound",
    "DATA",
    "PARITY",
]
