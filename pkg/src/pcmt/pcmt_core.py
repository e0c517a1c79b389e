"""Layered polar-coded Merkle tree: planning, building, proofs and decoding.

Layers are numbered 1 (top, hashed into the root) to ``l`` (base, holding the
block).  Every layer stores one symbol per VN of its factor graph, laid out by
position ``1..TVN``::

    [zero pads] [dropped VNs, ascending id] [data VNs] [parity VNs]

so data sit at ``(dI, dI + k]`` and parity at ``(dI + k, dI + N]``.  The hash
of the symbol at position ``x`` of layer ``j`` is stored in parent data symbol
``1 + (x - 1) % k_{j-1}`` at slot ``(x - 1) // k_{j-1}``.  Pads are zero
symbols whose slots hold zero bytes instead of a hash.
"""
from __future__ import annotations

import hashlib
import json
import struct
from dataclasses import dataclass, field
from fractions import Fraction
from functools import cached_property, lru_cache
from typing import Iterable, Mapping, Sequence

from .code_design import CodeDesign, nf_design, prune_design, retain_rows, sef_design
from .erasure_codec import DecodeResult, pepc_encode_ints, peel
from .errors import ParameterError, StructuralError
from .polar_fg import FactorGraph

ARCHIVE_MAGIC = b"PCMTARCH1\n"


@dataclass(frozen=True)
class PcmtParams:
    K: int
    R: Fraction
    q: int
    l: int
    c: int
    pruned: bool = False
    freezing: str = "sef"
    hash_name: str = "sha256"

    def __post_init__(self):
        object.__setattr__(self, "R", Fraction(self.R).limit_denominator(1 << 20))
        if self.K < 1 or self.l < 1 or self.c < 1 or self.q < 1:
            raise ParameterError("K, q, l and c must be positive")
        if not 0 < self.R < 1:
            raise ParameterError(f"rate must lie in (0, 1), got {self.R}")
        if self.freezing not in ("sef", "nf"):
            raise ParameterError(f"unknown freezing rule {self.freezing!r}")
        try:
            hashlib.new(self.hash_name)
        except ValueError as exc:
            raise ParameterError(str(exc)) from None

    @property
    def y(self) -> int:
        return hashlib.new(self.hash_name).digest_size

    @property
    def b(self) -> int:
        return self.c * self.K

    def k_of(self, j: int) -> int:
        k = Fraction(self.K) / (self.q * self.R) ** (self.l - j)
        if k.denominator != 1 or k < 1:
            raise ParameterError(f"layer {j}: information length {k} is not a positive integer")
        return int(k)

    def hash(self, data: bytes) -> bytes:
        return hashlib.new(self.hash_name, data).digest()

    def to_dict(self) -> dict:
        return {
            "K": self.K,
            "R": f"{self.R.numerator}/{self.R.denominator}",
            "q": self.q,
            "l": self.l,
            "c": self.c,
            "pruned": self.pruned,
            "freezing": self.freezing,
            "hash": self.hash_name,
        }

    @classmethod
    def from_dict(cls, d: Mapping) -> PcmtParams:
        try:
            return cls(
                K=int(d["K"]),
                R=Fraction(str(d["R"])),
                q=int(d["q"]),
                l=int(d["l"]),
                c=int(d["c"]),
                pruned=bool(d.get("pruned", False)),
                freezing=d.get("freezing", "sef"),
                hash_name=d.get("hash", "sha256"),
            )
        except (KeyError, ValueError, ZeroDivisionError) as exc:
            raise ParameterError(f"bad tree parameters: {exc}") from None


@dataclass(frozen=True, eq=False)
class LayerPlan:
    j: int
    k: int
    design: CodeDesign = field(repr=False)
    tvn: int
    symbol_size: int

    @property
    def fg(self) -> FactorGraph:
        return self.design.fg

    @property
    def n(self) -> int:
        return self.design.n

    @property
    def n_sef(self) -> int:
        return self.design.n_sef

    @property
    def alpha_min(self) -> int:
        return self.design.alpha_min

    @property
    def tot_vn(self) -> int:
        return len(self.fg.vns)

    @property
    def pads(self) -> int:
        return self.tvn - self.tot_vn

    @property
    def di(self) -> int:
        return self.tvn - self.n

    @cached_property
    def slots(self) -> tuple[int | None, ...]:
        """VN id at each position (index 0 is position 1); ``None`` marks a pad."""
        fg = self.fg
        return (None,) * self.pads + fg.dropped_ids + fg.coded_vn_ids

    @cached_property
    def position(self) -> dict[int, int]:
        return {v: p for p, v in enumerate(self.slots, 1) if v is not None}

    def coded_positions(self) -> range:
        return range(self.di + 1, self.tvn + 1)

    def is_pad(self, pos: int) -> bool:
        return pos <= self.pads

    def summary(self) -> dict:
        return {
            "j": self.j,
            "k": self.k,
            "N_SEF": self.n_sef,
            "N": self.n,
            "totVN": self.tot_vn,
            "TVN": self.tvn,
            "dI": self.di,
            "alpha_min": self.alpha_min,
            "symbol_size": self.symbol_size,
        }


@dataclass(frozen=True, eq=False)
class TreePlan:
    params: PcmtParams
    layers: tuple[LayerPlan, ...]
    aligned: bool

    def layer(self, j: int) -> LayerPlan:
        if not 1 <= j <= len(self.layers):
            raise ParameterError(f"layer {j} outside [1, {len(self.layers)}]")
        return self.layers[j - 1]

    @property
    def base(self) -> LayerPlan:
        return self.layers[-1]

    def q_tilde(self, j: int) -> int:
        """Hashes packed in each data symbol of layer ``j - 1``."""
        return self.layer(j).tvn // self.layer(j - 1).k


def _design(params: PcmtParams, k: int, j: int) -> CodeDesign:
    n_target = Fraction(k) / params.R
    if n_target.denominator != 1:
        raise ParameterError(f"layer {j}: code length k/R = {n_target} is not an integer")
    if params.freezing == "nf":
        return nf_design(int(n_target), k)
    return sef_design(int(n_target), k)


def plan_tree(params: PcmtParams, align: bool = True) -> TreePlan:
    """Per-layer code designs and layout geometry.

    With ``align`` every layer ``j >= 2`` is lengthened by frozen zero rows
    until ``k_{j-1}`` divides its length; together with ``k_{j-1} | k_j`` this
    makes every proof element checkable against the data element one layer up.
    ``align=False`` keeps the raw design lengths and is only meant for
    size metrics.
    """
    return _plan_tree(params, align)


@lru_cache(maxsize=64)
def _plan_tree(params: PcmtParams, align: bool) -> TreePlan:
    ks = [params.k_of(j) for j in range(1, params.l + 1)]
    designs = []
    for j, k in enumerate(ks, 1):
        d = _design(params, k, j)
        if align and j >= 2:
            parent_k = ks[j - 2]
            if k % parent_k:
                raise ParameterError(f"layer {j}: k_{j - 1}={parent_k} does not divide k_{j}={k}")
            n = d.n
            while n % parent_k:
                n += 1
            if n > d.fg.full_length:
                raise ParameterError(f"layer {j}: no aligned length up to {d.fg.full_length}")
            d = retain_rows(d, n)
        if params.pruned:
            d = prune_design(d)
        designs.append(d)
    tvns = []
    for j, d in enumerate(designs, 1):
        tot = len(d.fg.vns)
        if j == 1:
            tvns.append(tot)
        else:
            pk = ks[j - 2]
            tvns.append(-(-tot // pk) * pk)
    layers = []
    for j, (k, d, tvn) in enumerate(zip(ks, designs, tvns), 1):
        size = params.c if j == params.l else (tvns[j] // k) * params.y
        layers.append(LayerPlan(j, k, d, tvn, size))
    return TreePlan(params, tuple(layers), align)


@dataclass(frozen=True)
class Root:
    hashes: tuple[bytes, ...]
    params: PcmtParams
    block_len: int

    @property
    def plan(self) -> TreePlan:
        return plan_tree(self.params)

    def hex(self) -> str:
        return b"".join(self.hashes).hex()

    def header(self) -> dict:
        return {
            "params": self.params.to_dict(),
            "root": self.hex(),
            "block_len": self.block_len,
            "layers": [lp.summary() for lp in self.plan.layers],
        }


@dataclass(frozen=True, eq=False)
class Pcmt:
    params: PcmtParams
    plan: TreePlan
    symbols: tuple[tuple[bytes, ...], ...]  # per layer, by position
    root: Root

    def symbol(self, j: int, pos: int) -> bytes:
        lp = self.plan.layer(j)
        if not 1 <= pos <= lp.tvn:
            raise ParameterError(f"position {pos} outside [1, {lp.tvn}] at layer {j}")
        return self.symbols[j - 1][pos - 1]

    def to_archive(self) -> bytes:
        header = json.dumps(self.root.header(), sort_keys=True, separators=(",", ":")).encode()
        body = b"".join(b"".join(layer) for layer in self.symbols)
        return ARCHIVE_MAGIC + struct.pack(">I", len(header)) + header + body

    @classmethod
    def from_archive(cls, blob: bytes) -> Pcmt:
        if not blob.startswith(ARCHIVE_MAGIC):
            raise ParameterError("not a tree archive")
        off = len(ARCHIVE_MAGIC)
        (hlen,) = struct.unpack_from(">I", blob, off)
        off += 4
        header = json.loads(blob[off : off + hlen])
        off += hlen
        params = PcmtParams.from_dict(header["params"])
        plan = plan_tree(params)
        layers = []
        for lp in plan.layers:
            size = lp.symbol_size
            chunk = blob[off : off + size * lp.tvn]
            if len(chunk) != size * lp.tvn:
                raise ParameterError("truncated tree archive")
            layers.append(tuple(chunk[i * size : (i + 1) * size] for i in range(lp.tvn)))
            off += size * lp.tvn
        y = params.y
        raw = bytes.fromhex(header["root"])
        root = Root(tuple(raw[i : i + y] for i in range(0, len(raw), y)), params, header["block_len"])
        tree = cls(params, plan, tuple(layers), root)
        if _root_hashes(params, layers[0]) != root.hashes:
            raise ParameterError("archive root does not match its top layer")
        return tree


def _root_hashes(params: PcmtParams, top: Sequence[bytes]) -> tuple[bytes, ...]:
    return tuple(params.hash(s) for s in top)


def _layer_symbols(lp: LayerPlan, values: Mapping[int, int]) -> list[bytes]:
    size = lp.symbol_size
    zero = bytes(size)
    return [zero if v is None else values[v].to_bytes(size, "big") for v in lp.slots]


def _parent_data(params: PcmtParams, symbols: Sequence[bytes], parent_k: int, pads: int) -> list[bytes]:
    groups: list[list[bytes]] = [[] for _ in range(parent_k)]
    zero = bytes(params.y)
    for x, s in enumerate(symbols):
        groups[x % parent_k].append(zero if x < pads else params.hash(s))
    return [b"".join(g) for g in groups]


def _split(block: bytes, params: PcmtParams) -> list[bytes]:
    if len(block) > params.b:
        raise ParameterError(f"block of {len(block)} bytes exceeds c*K = {params.b}")
    padded = block + bytes(params.b - len(block))
    return [padded[i * params.c : (i + 1) * params.c] for i in range(params.K)]


def _build(block: bytes, params: PcmtParams, corrupt: tuple[int, int] | None = None) -> Pcmt:
    plan = plan_tree(params)
    data = _split(block, params)
    layers: list[list[bytes]] = [None] * params.l  # type: ignore[list-item]
    for lp in reversed(plan.layers):
        values = pepc_encode_ints(lp.fg, [int.from_bytes(d, "big") for d in data])
        symbols = _layer_symbols(lp, values)
        if corrupt is not None and corrupt[0] == lp.j:
            pos = corrupt[1]
            if lp.is_pad(pos) or not 1 <= pos <= lp.tvn:
                raise ParameterError(f"cannot corrupt position {pos} of layer {lp.j}")
            s = bytearray(symbols[pos - 1])
            s[0] ^= 0x01
            symbols[pos - 1] = bytes(s)
        layers[lp.j - 1] = symbols
        if lp.j > 1:
            data = _parent_data(params, symbols, plan.layer(lp.j - 1).k, lp.pads)
    root = Root(_root_hashes(params, layers[0]), params, len(block))
    return Pcmt(params, plan, tuple(tuple(s) for s in layers), root)


def build(block: bytes, params: PcmtParams) -> Pcmt:
    """Encode ``block`` (zero-padded to ``c*K`` bytes) into a tree."""
    return _build(block, params)


def build_incorrectly_coded(block: bytes, params: PcmtParams, layer: int, position: int) -> Pcmt:
    """A tree whose producer flipped one bit of a symbol before hashing it upward.

    Models an incorrect-coding attack: the commitment is internally
    consistent, but the flipped symbol no longer satisfies its checks.
    """
    return _build(block, params, corrupt=(layer, position))


# -- proofs -------------------------------------------------------------------

@dataclass(frozen=True)
class ProofElement:
    layer: int
    index: int
    data: bytes


@dataclass(frozen=True)
class MerkleProof:
    layer: int
    index: int
    elements: tuple[ProofElement, ...]

    def to_dict(self) -> dict:
        return {
            "target": [self.layer, self.index],
            "elements": [[e.layer, e.index, e.data.hex()] for e in self.elements],
        }

    def to_json(self) -> str:
        return json.dumps(self.to_dict(), sort_keys=True, separators=(",", ":"))

    @classmethod
    def from_dict(cls, d: Mapping) -> MerkleProof:
        layer, index = d["target"]
        return cls(layer, index, tuple(ProofElement(a, b, bytes.fromhex(h)) for a, b, h in d["elements"]))


def proof_indices(plan: TreePlan, j: int, pos: int) -> list[tuple[int, int, int]]:
    """``(layer, data position, parity position)`` for every layer above ``j``."""
    lp = plan.layer(j)
    if not 1 <= pos <= lp.tvn:
        raise ParameterError(f"position {pos} outside [1, {lp.tvn}] at layer {j}")
    out = []
    for jp in range(1, j):
        up = plan.layer(jp)
        d = up.di + 1 + (pos - 1) % up.k
        p = up.di + 1 + up.k + (pos - 1) % (up.n - up.k)
        out.append((jp, d, p))
    return out


class _SymbolSource:
    """Anything that can hand out a symbol by (layer, position)."""

    def symbol(self, j: int, pos: int) -> bytes:  # pragma: no cover - protocol
        raise NotImplementedError


def merkle_proof(tree, j: int, pos: int) -> MerkleProof:
    """Data and parity element from each layer above ``j``; empty for layer 1."""
    elements = []
    for jp, d, p in proof_indices(tree.plan, j, pos):
        elements.append(ProofElement(jp, d, tree.symbol(jp, d)))
        elements.append(ProofElement(jp, p, tree.symbol(jp, p)))
    return MerkleProof(j, pos, tuple(elements))


def _slot(plan: TreePlan, j: int, pos: int, parent: bytes) -> bytes:
    y = plan.params.y
    s = (pos - 1) // plan.layer(j - 1).k
    return parent[s * y : (s + 1) * y]


def verify_inclusion(symbol: tuple[int, int, bytes], proof: MerkleProof, root: Root) -> bool:
    """Check a symbol against the root through the chain of data elements in its proof."""
    j, pos, value = symbol
    plan = root.plan
    params = root.params
    if (proof.layer, proof.index) != (j, pos):
        return False
    try:
        expected = proof_indices(plan, j, pos)
    except ParameterError:
        return False
    lp = plan.layer(j)
    if len(value) != lp.symbol_size or len(proof.elements) != 2 * len(expected):
        return False
    data_at: dict[int, ProofElement] = {}
    parity_at: dict[int, ProofElement] = {}
    for (jp, d, p), e_d, e_p in zip(expected, proof.elements[0::2], proof.elements[1::2]):
        if (e_d.layer, e_d.index) != (jp, d) or (e_p.layer, e_p.index) != (jp, p):
            return False
        size = plan.layer(jp).symbol_size
        if len(e_d.data) != size or len(e_p.data) != size:
            return False
        data_at[jp], parity_at[jp] = e_d, e_p

    def digest_for(layer: int, idx: int, data: bytes) -> bytes | None:
        lpl = plan.layer(layer)
        if lpl.is_pad(idx):
            return bytes(params.y) if data == bytes(lpl.symbol_size) else None
        return params.hash(data)

    def holds(layer: int, idx: int, data: bytes) -> bool:
        h = digest_for(layer, idx, data)
        if h is None:
            return False
        if layer == 1:
            return root.hashes[idx - 1] == h
        parent = data_at[layer - 1]
        if (idx - 1) % plan.layer(layer - 1).k != parent.index - plan.layer(layer - 1).di - 1:
            return False
        return _slot(plan, layer, idx, parent.data) == h

    if not holds(j, pos, value):
        return False
    for jp in range(1, j):
        if not holds(jp, data_at[jp].index, data_at[jp].data):
            return False
        if not holds(jp, parity_at[jp].index, parity_at[jp].data):
            return False
    return True


# -- decoding -----------------------------------------------------------------

@dataclass(frozen=True)
class ProvenSymbol:
    layer: int
    index: int
    data: bytes
    proof: MerkleProof


@dataclass(frozen=True)
class IcProof:
    """Evidence that a layer was mis-encoded.

    ``cn`` is the failing check (``None`` when a frozen symbol was committed
    non-zero); ``symbols`` are the other members of that check with their
    proofs; ``missing`` is the proof of the member whose reconstruction does
    not match the commitment.
    """

    layer: int
    cn: int | None
    symbols: tuple[ProvenSymbol, ...]
    missing: MerkleProof

    def to_dict(self) -> dict:
        return {
            "layer": self.layer,
            "cn": self.cn,
            "symbols": [
                {"index": s.index, "data": s.data.hex(), "proof": s.proof.to_dict()} for s in self.symbols
            ],
            "missing": self.missing.to_dict(),
        }

    def to_json(self) -> str:
        return json.dumps(self.to_dict(), sort_keys=True, separators=(",", ":"))

    @classmethod
    def from_dict(cls, d: Mapping) -> IcProof:
        layer = d["layer"]
        symbols = tuple(
            ProvenSymbol(layer, s["index"], bytes.fromhex(s["data"]), MerkleProof.from_dict(s["proof"]))
            for s in d["symbols"]
        )
        return cls(layer, d["cn"], symbols, MerkleProof.from_dict(d["missing"]))


@dataclass(frozen=True)
class DaAlarm:
    layer: int
    unresolved: frozenset[int]  # VN ids of the stuck stopping set

    def positions(self, plan: TreePlan) -> list[int]:
        pos = plan.layer(self.layer).position
        return sorted(pos[v] for v in self.unresolved)


@dataclass(frozen=True)
class DecodedBlock:
    block: bytes
    tree: Pcmt


class _PartialTree:
    """Decoded layers collected so far; used to cut proofs during decoding."""

    def __init__(self, plan: TreePlan):
        self.plan = plan
        self.layers: dict[int, list[bytes | None]] = {}

    def symbol(self, j: int, pos: int) -> bytes:
        s = self.layers[j][pos - 1]
        if s is None:
            raise StructuralError(f"symbol {pos} of layer {j} not decoded")
        return s


def gen_ic_proof(tree, layer: int, cn: int | None, decoded: Mapping[int, int], culprit: int) -> IcProof:
    """Build an IC proof for check ``cn`` of ``layer`` blaming VN ``culprit``.

    ``decoded`` maps VN ids of the layer to their decoded int values; ``tree``
    must supply every symbol of the layers above.
    """
    lp = tree.plan.layer(layer)
    pos = lp.position[culprit]
    others: list[int] = []
    if cn is not None:
        members = lp.fg.cns[cn].vns
        if culprit not in members:
            raise ParameterError(f"v{culprit} is not a member of c{cn}")
        others = [v for v in members if v != culprit]
    symbols = []
    for v in others:
        p = lp.position[v]
        data = decoded[v].to_bytes(lp.symbol_size, "big")
        symbols.append(ProvenSymbol(layer, p, data, merkle_proof(tree, layer, p)))
    return IcProof(layer, cn, tuple(symbols), merkle_proof(tree, layer, pos))


def verify_ic_proof(proof: IcProof, root: Root) -> bool:
    plan = root.plan
    try:
        lp = plan.layer(proof.layer)
    except ParameterError:
        return False
    if proof.missing.layer != proof.layer or not 1 <= proof.missing.index <= lp.tvn:
        return False
    culprit = lp.slots[proof.missing.index - 1]
    if culprit is None:
        return False
    if proof.cn is None:
        if proof.symbols:
            raise ParameterError("a frozen-symbol proof carries no member symbols")
        if culprit not in lp.fg.frozen_ids:
            return False
        tau = bytes(lp.symbol_size)
    else:
        node = lp.fg.cns.get(proof.cn)
        if node is None or culprit not in node.vns:
            return False
        if len(proof.symbols) != node.degree - 1:
            raise ParameterError(f"check c{proof.cn} needs {node.degree - 1} symbols, got {len(proof.symbols)}")
        members = {lp.slots[s.index - 1] for s in proof.symbols if 1 <= s.index <= lp.tvn}
        if members != set(node.vns) - {culprit} or any(s.layer != proof.layer for s in proof.symbols):
            return False
        acc = 0
        for s in proof.symbols:
            if not verify_inclusion((s.layer, s.index, s.data), s.proof, root):
                return False
            acc ^= int.from_bytes(s.data, "big")
        tau = acc.to_bytes(lp.symbol_size, "big")
    return not verify_inclusion((proof.layer, proof.missing.index, tau), proof.missing, root)


def hash_aware_decode(
    root: Root, available: Mapping[int, Mapping[int, bytes]]
) -> DecodedBlock | DaAlarm | IcProof:
    """Decode top-down, matching every symbol against the hash its parent committed to.

    ``available`` maps layer to ``{position: symbol}``.  Supplied symbols must
    match their committed hashes (``ParameterError`` otherwise).  Returns the
    block, an alarm for the first layer that stalls, or an IC proof for the
    first mis-encoded check found.
    """
    plan = root.plan
    params = root.params
    partial = _PartialTree(plan)
    expected: list[bytes | None] = list(root.hashes)
    for lp in plan.layers:
        j = lp.j
        obs = available.get(j, {})
        known: dict[int, int] = {}
        for pos, data in obs.items():
            if not 1 <= pos <= lp.tvn or len(data) != lp.symbol_size:
                raise ParameterError(f"malformed symbol at layer {j}, position {pos}")
            v = lp.slots[pos - 1]
            if v is None:
                continue
            if params.hash(data) != expected[pos - 1]:
                raise ParameterError(f"symbol {pos} of layer {j} fails inclusion")
            known[v] = int.from_bytes(data, "big")
        result: DecodeResult = peel(lp.fg, known)
        if result.unresolved:
            return DaAlarm(j, result.unresolved)
        values = result.values
        partial.layers[j] = _layer_symbols(lp, values)

        def matches(v: int) -> bool:
            pos = lp.position[v]
            return params.hash(partial.layers[j][pos - 1]) == expected[pos - 1]

        for v in lp.fg.frozen_ids:
            if not matches(v):
                return gen_ic_proof(partial, j, None, values, v)
        for v, c in result.trace:
            if not matches(v):
                return gen_ic_proof(partial, j, c, values, v)
        for c in result.inconsistent:
            # every member is committed; the highest id takes the blame
            return gen_ic_proof(partial, j, c, values, max(lp.fg.cns[c].vns))
        if j < params.l:
            child = plan.layer(j + 1)
            data = [partial.layers[j][p - 1] for p in range(lp.di + 1, lp.di + lp.k + 1)]
            y = params.y
            expected = [None] * child.tvn
            for x in range(child.tvn):
                d = data[x % lp.k]
                s = x // lp.k
                expected[x] = d[s * y : (s + 1) * y]
        else:
            base = partial.layers[j]
            block = b"".join(base[p - 1] for p in range(lp.di + 1, lp.di + lp.k + 1))
            tree = Pcmt(params, plan, tuple(tuple(partial.layers[i]) for i in range(1, params.l + 1)), root)
            return DecodedBlock(block[: root.block_len], tree)
    raise StructuralError("unreachable")


def available_from(tree: Pcmt, hidden: Mapping[int, Iterable[int]] | None = None) -> dict[int, dict[int, bytes]]:
    """Every coded symbol of every layer except the hidden positions."""
    hidden = hidden or {}
    out = {}
    for lp in tree.plan.layers:
        skip = set(hidden.get(lp.j, ()))
        out[lp.j] = {p: tree.symbol(lp.j, p) for p in lp.coded_positions() if p not in skip}
    return out
