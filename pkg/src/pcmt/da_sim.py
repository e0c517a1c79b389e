"""Data-availability attacks against light-node sampling.

A light node draws base-layer coded symbols uniformly with replacement.  A
draw exposes an attack at layer ``j`` if the drawn symbol itself is hidden
(``j`` is the base) or one of its proof elements at layer ``j`` is hidden.
"""
from __future__ import annotations

import math
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass
from fractions import Fraction
from typing import Iterable, Sequence

import numpy as np

from .code_design import threshold_lower_bound
from .erasure_codec import peel
from .errors import ParameterError
from .pcmt_core import TreePlan
from .polar_fg import row_reduced_fg, stopping_tree

CHUNK = 1 << 14  # trials per independently seeded chunk


def pf_analytical(layers: Iterable, s: int) -> float:
    """``max_j (1 - alpha_j / N_j) ** s`` over layers with ``alpha_min`` and ``n`` attributes."""
    layers = list(layers)
    return pf_from([lp.alpha_min for lp in layers], [lp.n for lp in layers], s)


def pf_from(alphas: Sequence[int], ns: Sequence[int], s: int) -> float:
    if s < 0:
        raise ParameterError("sample count must be non-negative")
    return max(float((1 - Fraction(a, n)) ** s) for a, n in zip(alphas, ns))


@dataclass(frozen=True)
class AttackSpec:
    layer: int
    hidden: frozenset[int]  # positions within the layer


def minimum_tree_attack(plan: TreePlan, layer: int) -> AttackSpec:
    """Hide the leaf set of the smallest stopping tree with an information root."""
    lp = plan.layer(layer)
    fg = lp.fg
    info = [i for i in range(1, lp.n + 1) if i not in lp.design.frozen]
    root = min(info, key=lambda i: (bin(i - 1).count("1"), i))
    full = fg if not fg.pruned else row_reduced_fg(fg.full_length, fg.n_rows, fg.frozen)
    tree = stopping_tree(full, root)
    # coded VNs keep their ids through pruning, so leaf ids map directly
    return AttackSpec(layer, frozenset(lp.position[v] for v in tree.leaf_set))


def is_valid_attack(plan: TreePlan, attack: AttackSpec) -> bool:
    """True when hiding ``attack.hidden`` stalls the peeling decoder at its layer."""
    lp = plan.layer(attack.layer)
    coded = set(lp.coded_positions())
    if not attack.hidden or not attack.hidden <= coded:
        raise ParameterError(f"hidden positions must be coded symbols of layer {attack.layer}")
    known = {lp.slots[p - 1]: 0 for p in coded - attack.hidden}
    return bool(peel(lp.fg, known).unresolved)


def detection_mask(plan: TreePlan, attack: AttackSpec) -> np.ndarray:
    """For each base coded symbol, whether sampling it exposes the attack."""
    base = plan.base
    lam = np.arange(base.di + 1, base.tvn + 1)
    hidden = np.zeros(plan.layer(attack.layer).tvn + 1, dtype=bool)
    hidden[list(attack.hidden)] = True
    if attack.layer == base.j:
        return hidden[lam]
    up = plan.layer(attack.layer)
    d = up.di + 1 + (lam - 1) % up.k
    p = up.di + 1 + up.k + (lam - 1) % (up.n - up.k)
    return hidden[d] | hidden[p]


def _first_hits(mask: np.ndarray, s_max: int, trials: int, seed: int, workers: int | None) -> np.ndarray:
    """Index of the first exposing draw in each trial (``s_max`` if none)."""
    n_chunks = -(-trials // CHUNK)
    seeds = np.random.SeedSequence(seed).spawn(n_chunks)

    def run(i: int) -> np.ndarray:
        count = min(CHUNK, trials - i * CHUNK)
        rng = np.random.default_rng(seeds[i])
        if s_max == 0:
            return np.zeros(count, dtype=np.int64)
        hits = mask[rng.integers(0, mask.size, size=(count, s_max))]
        first = np.argmax(hits, axis=1)
        return np.where(hits.any(axis=1), first, s_max)

    if workers and workers > 1:
        with ThreadPoolExecutor(workers) as pool:
            parts = list(pool.map(run, range(n_chunks)))
    else:
        parts = [run(i) for i in range(n_chunks)]
    return np.concatenate(parts) if parts else np.zeros(0, dtype=np.int64)


def failure_curve(
    plan: TreePlan, attack: AttackSpec, s_values: Sequence[int], trials: int, seed: int, workers: int | None = None
) -> list[float]:
    """Empirical failure rate at each ``s`` using nested draws (the first ``s`` of one sequence)."""
    if trials < 1:
        raise ParameterError("need at least one trial")
    if not is_valid_attack(plan, attack):
        raise ParameterError("hidden set is decodable, so it is not a data-availability attack")
    mask = detection_mask(plan, attack)
    first = _first_hits(mask, max(s_values, default=0), trials, seed, workers)
    return [float(np.mean(first >= s)) for s in s_values]


def simulate(
    plan: TreePlan, attack: AttackSpec, s: int, trials: int, seed: int, workers: int | None = None
) -> float:
    """Fraction of trials in which ``s`` samples miss the attack entirely."""
    if s < 0:
        raise ParameterError("sample count must be non-negative")
    return failure_curve(plan, attack, [s], trials, seed, workers)[0]


def sample_budget(b: int, X: int, D_r) -> int:
    """Largest ``s`` with ``X * s <= b / D_r``."""
    D_r = Fraction(D_r)
    if D_r <= 1:
        raise ParameterError("budget divisor must exceed 1")
    X = Fraction(X)
    if X <= 0:
        raise ParameterError("sample size must be positive")
    return math.floor(Fraction(b) / (D_r * X))


def scaling_ratio(K: int, R, D_r) -> float:
    """``ln(P_u / P_p) / sqrt(K)`` with ``s = floor(K / D_r)`` samples in both trees.

    ``P_u`` is the uncoded tree's failure probability and ``P_p`` the coded
    tree's, bounded via the binomial-tail threshold bound at length ``K / R``.
    """
    R, D_r = Fraction(R), Fraction(D_r)
    N = Fraction(K) / R
    if N.denominator != 1:
        raise ParameterError("K / R must be an integer")
    N = int(N)
    s = math.floor(Fraction(K) / D_r)
    alpha = threshold_lower_bound(N, K)
    log_ratio = s * (math.log1p(-1 / K) - math.log1p(-alpha / N))
    return log_ratio / math.sqrt(K)


def scaling_limit(R, D_r) -> float:
    return 2 * math.sqrt(Fraction(R)) / float(Fraction(D_r))
