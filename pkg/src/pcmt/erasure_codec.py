"""Systematic peeling encoder and erasure peeling decoder over polar factor graphs.

Every CN states that the XOR of its members is the all-zero symbol.  Symbols
are fixed-length byte strings; internally they are held as Python ints so
XOR is a single operation.
"""
from __future__ import annotations

import random
from collections import deque
from dataclasses import dataclass, field
from typing import Mapping, Sequence

from .errors import ParameterError, StructuralError
from .polar_fg import FactorGraph


@dataclass
class SymbolVector:
    """Assignment of byte symbols to VNs.  Missing ids are erased."""

    values: dict[int, bytes]
    symbol_size: int

    def coded(self, fg: FactorGraph) -> list[bytes]:
        return [self.values[v] for v in fg.coded_vn_ids]


@dataclass
class DecodeResult:
    values: dict[int, int]
    unresolved: frozenset[int]
    inconsistent: tuple[int, ...]
    trace: list[tuple[int, int]] = field(repr=False)
    operations: int = 0

    @property
    def ok(self) -> bool:
        return not self.unresolved and not self.inconsistent

    def as_bytes(self, symbol_size: int) -> SymbolVector:
        return SymbolVector({v: x.to_bytes(symbol_size, "big") for v, x in self.values.items()}, symbol_size)


def peel(
    fg: FactorGraph, known: Mapping[int, int], rng: random.Random | None = None
) -> DecodeResult:
    """Resolve every CN with a single unknown member until none is left.

    ``known`` maps VN id to int symbol.  Frozen VNs still present in the
    graph are taken as zero.  CNs whose members are all known but do not XOR
    to zero are reported as inconsistent; the decoder never overwrites a
    known value.
    """
    values: dict[int, int] = dict(known)
    for v in fg.frozen_ids:
        values.setdefault(v, 0)
    cns = fg.cns
    adj = fg.vn_cns
    missing: dict[int, int] = {}
    acc: dict[int, int] = {}
    ops = 0
    for c, node in cns.items():
        a, unknown = 0, 0
        for v in node.vns:
            x = values.get(v)
            if x is None:
                unknown += 1
            else:
                a ^= x
        ops += node.degree
        missing[c], acc[c] = unknown, a
    seeds = [c for c in sorted(cns) if missing[c] == 1]
    if rng is not None:
        rng.shuffle(seeds)
    queue = deque(seeds)
    trace: list[tuple[int, int]] = []
    while queue:
        c = queue.popleft()
        if missing[c] != 1:
            continue
        v = next(u for u in cns[c].vns if u not in values)
        x = acc[c]
        values[v] = x
        trace.append((v, c))
        for c2 in adj[v]:
            ops += 1
            missing[c2] -= 1
            acc[c2] ^= x
            if missing[c2] == 1:
                queue.append(c2)
    inconsistent = tuple(c for c in sorted(cns) if missing[c] == 0 and acc[c] != 0)
    unresolved = frozenset(v for v in fg.vns if v not in values)
    return DecodeResult(values, unresolved, inconsistent, trace, ops)


def to_int(symbol: bytes) -> int:
    return int.from_bytes(symbol, "big")


def _uniform_size(symbols: Sequence[bytes]) -> int:
    sizes = {len(s) for s in symbols}
    if len(sizes) > 1:
        raise ParameterError(f"symbols must share one size, got sizes {sorted(sizes)}")
    return sizes.pop() if sizes else 0


def pepc_encode_ints(fg: FactorGraph, data: Sequence[int]) -> dict[int, int]:
    """Full VN assignment with ``data`` on the coded VNs of information rows."""
    if len(data) != len(fg.data_ids):
        raise ParameterError(f"expected {len(fg.data_ids)} data symbols, got {len(data)}")
    result = peel(fg, dict(zip(fg.data_ids, data)))
    if not result.ok:
        raise StructuralError(
            f"peeling encoder stalled with {len(result.unresolved)} unresolved VNs "
            f"and {len(result.inconsistent)} violated CNs"
        )
    return result.values


def pepc_encode(fg: FactorGraph, data: Sequence[bytes], frozen=None) -> SymbolVector:
    """Systematic encoding by peeling; ``frozen`` overrides the graph's frozen rows."""
    if frozen is not None:
        fg = fg.with_frozen(frozen)
    size = _uniform_size(data)
    values = pepc_encode_ints(fg, [to_int(d) for d in data])
    return SymbolVector({v: x.to_bytes(size, "big") for v, x in values.items()}, size)


def peel_decode(
    fg: FactorGraph,
    observed: Mapping[int, bytes],
    frozen=None,
    rng: random.Random | None = None,
) -> tuple[SymbolVector, DecodeResult]:
    """Decode from observed coded symbols.

    Returns the recovered assignment (erased entries absent) and the raw
    result, whose ``unresolved`` set is a stopping set when decoding stalls.
    """
    if frozen is not None:
        fg = fg.with_frozen(frozen)
    stray = [v for v in observed if v not in fg.vns]
    if stray:
        raise ParameterError(f"observed ids not in graph: {sorted(stray)[:5]}")
    size = _uniform_size(list(observed.values()))
    result = peel(fg, {v: to_int(s) for v, s in observed.items()}, rng=rng)
    return result.as_bytes(size), result


def check_codeword(fg: FactorGraph, values: Mapping[int, int]) -> list[int]:
    """CN ids whose members do not XOR to zero."""
    bad = []
    for c, node in fg.cns.items():
        a = 0
        for v in node.vns:
            a ^= values[v]
        if a:
            bad.append(c)
    return bad
