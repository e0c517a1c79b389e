"""Dispersal design for a committee of oracle nodes.

Each of ``theta`` nodes receives ``g`` base coded symbols drawn uniformly
without replacement (independently across nodes).  A dispersal is
``(l, mu)``-correct when every quorum of ``ceil(gamma * theta)`` nodes jointly
holds at least ``N_l - mu + 1`` distinct base symbols.
"""
from __future__ import annotations

import itertools
import math
import warnings
from dataclasses import dataclass, field
from fractions import Fraction
from math import comb
from typing import Sequence

import numpy as np

from .errors import InfeasibleError, ParameterError
from .pcmt_core import TreePlan


@dataclass(frozen=True)
class OracleParams:
    theta: int
    beta: Fraction
    gamma: Fraction
    p_th: float

    def __post_init__(self):
        object.__setattr__(self, "beta", Fraction(str(self.beta)))
        object.__setattr__(self, "gamma", Fraction(str(self.gamma)))
        if self.theta < 1:
            raise ParameterError("need at least one oracle node")
        if not 0 <= self.beta < Fraction(1, 2):
            raise ParameterError(f"corruptible fraction must lie in [0, 1/2), got {self.beta}")
        if not 0 < self.gamma <= 1 - 2 * self.beta:
            raise ParameterError(f"quorum margin must lie in (0, 1 - 2*beta], got {self.gamma}")
        if not 0 < self.p_th <= 1:
            raise ParameterError(f"threshold must lie in (0, 1], got {self.p_th}")

    @property
    def quorum(self) -> int:
        """``ceil(gamma * theta)``, the adversarial quorum size used in the bound."""
        return math.ceil(self.gamma * self.theta)


def mu_min(alphas: Sequence[int], ns: Sequence[int]) -> int:
    """``floor(min_j (alpha_j - 1) / N_j * N_l) + 1`` in exact arithmetic."""
    if len(alphas) != len(ns) or not alphas:
        raise ParameterError("need matching, non-empty threshold and length vectors")
    if any(a < 1 for a in alphas):
        raise ParameterError("thresholds must be at least 1")
    worst = min(Fraction(a - 1, n) for a, n in zip(alphas, ns))
    return math.floor(worst * ns[-1]) + 1


def entropy_nats(p: Fraction) -> float:
    p = float(p)
    if p in (0.0, 1.0):
        return 0.0
    return -p * math.log(p) - (1 - p) * math.log1p(-p)


def raw_alternating_sum(N_l: int, mu: int, g: int, t: int) -> Fraction:
    """Probability that ``t`` random ``g``-subsets of ``[N_l]`` miss at least ``mu`` symbols.

    Alternating sum over the size ``j`` of the largest set the union may lie
    in; exact, so no cancellation error.
    """
    if not 1 <= mu <= N_l or not 1 <= g <= N_l or t < 1:
        raise ParameterError(f"need 1 <= mu, g <= N_l and t >= 1 (N_l={N_l}, mu={mu}, g={g}, t={t})")
    total = 0
    top = N_l - mu
    if g > top:
        return Fraction(0)
    # C(j, g) vanishes below g; the other factors are advanced incrementally
    c_jg, c_nj, c_rest = 1, comb(N_l, g), comb(N_l - g - 1, mu - 1)
    for j in range(g, top + 1):
        term = c_nj * c_rest * c_jg**t
        total += -term if (top - j) % 2 else term
        c_jg = c_jg * (j + 1) // (j + 1 - g)
        c_nj = c_nj * (N_l - j) // (j + 1)
        if N_l - j - 2 >= mu - 1:
            c_rest = c_rest * (N_l - j - 1 - (mu - 1)) // (N_l - j - 1)
        else:
            c_rest = 0
    return Fraction(total, comb(N_l, g) ** t)


def prob_not_correct(N_l: int, mu: int, g: int, oracle: OracleParams) -> float:
    """Upper bound on the probability that a random dispersal is not ``(l, mu)``-correct."""
    return _scale(raw_alternating_sum(N_l, mu, g, oracle.quorum), oracle)


def _scale(raw: Fraction, oracle: OracleParams) -> float:
    # the entropy factor is applied in log space so large theta cannot overflow early
    if raw <= 0:
        return 0.0
    log_val = oracle.theta * entropy_nats(oracle.gamma) + math.log(raw.numerator) - math.log(raw.denominator)
    return math.exp(log_val) if log_val < 709 else math.inf


def g_star(mu: int, oracle: OracleParams, N_l: int) -> int:
    """Smallest ``g`` whose bound falls below ``p_th``."""
    prev = None
    for g in range(1, N_l + 1):
        raw = raw_alternating_sum(N_l, mu, g, oracle.quorum)
        if prev is not None and raw > prev:
            warnings.warn(f"failure bound rises from g={g - 1} to g={g}", RuntimeWarning, stacklevel=2)
        if _scale(raw, oracle) < oracle.p_th:
            return g
        prev = raw
    raise InfeasibleError(f"no g <= {N_l} brings the bound below {oracle.p_th}")


def comm_cost(g: int, oracle: OracleParams, X: int) -> int:
    return oracle.theta * g * X


@dataclass
class DispersalPlan:
    g: int
    n_l: int
    assignment: list[tuple[int, ...]] = field(repr=False)  # base positions per node
    mu: int
    quorum: int
    min_quorum_cover: int
    exhaustive: bool

    @property
    def correct(self) -> bool:
        return self.min_quorum_cover >= self.n_l - self.mu + 1

    def report(self) -> dict:
        return {
            "g": self.g,
            "mu": self.mu,
            "quorum": self.quorum,
            "min_quorum_cover": self.min_quorum_cover,
            "exhaustive": self.exhaustive,
            "correct": self.correct,
        }


def _min_cover(masks: Sequence[int], quorum: int, rng: np.random.Generator, exhaustive: bool) -> int:
    if exhaustive:
        combos = itertools.combinations(masks, quorum)
    else:
        # random quorums plus a greedy adversary that keeps the union small
        idx = [rng.choice(len(masks), quorum, replace=False) for _ in range(4096)]
        combos = [tuple(masks[i] for i in row) for row in idx]
        chosen: list[int] = []
        union = 0
        rest = list(masks)
        for _ in range(quorum):
            best = min(rest, key=lambda m: bin(union | m).count("1"))
            rest.remove(best)
            union |= best
            chosen.append(best)
        combos.append(tuple(chosen))
    best = None
    for group in combos:
        u = 0
        for m in group:
            u |= m
        c = bin(u).count("1")
        if best is None or c < best:
            best = c
    return best


def sample_dispersal(
    plan: TreePlan, g: int, oracle: OracleParams, mu: int, seed: int, exhaustive_limit: int = 12
) -> DispersalPlan:
    """Draw one dispersal and measure its worst quorum coverage."""
    n_l = plan.base.n
    if not 1 <= g <= n_l:
        raise ParameterError(f"g must lie in [1, {n_l}]")
    rng = np.random.default_rng(seed)
    positions = np.arange(plan.base.di + 1, plan.base.tvn + 1)
    picks = [np.sort(rng.choice(n_l, g, replace=False)) for _ in range(oracle.theta)]
    masks = [sum(1 << int(i) for i in row) for row in picks]
    exhaustive = oracle.theta <= exhaustive_limit
    cover = _min_cover(masks, oracle.quorum, rng, exhaustive)
    assignment = [tuple(int(positions[i]) for i in row) for row in picks]
    return DispersalPlan(g, n_l, assignment, mu, oracle.quorum, cover, exhaustive)


def layer_coverage(plan: TreePlan, base_positions: Sequence[int]) -> dict[int, int]:
    """Distinct coded symbols of each layer held through the given base symbols and their proofs."""
    out = {}
    base = plan.base
    out[base.j] = len({p for p in base_positions if p > base.di})
    for lp in plan.layers[:-1]:
        held = set()
        for lam in base_positions:
            held.add(lp.di + 1 + (lam - 1) % lp.k)
            held.add(lp.di + 1 + lp.k + (lam - 1) % (lp.n - lp.k))
        out[lp.j] = len(held)
    return out


def monte_carlo_failure(
    N_l: int, theta: int, quorum: int, g: int, mus: Sequence[int], draws: int, seed: int
) -> dict[int, float]:
    """Empirical frequency of non-correct dispersals for each ``mu`` (exhaustive quorums).

    Uses the same draws for every ``mu``; intended for small ``N_l`` (at most 16).
    """
    if N_l > 16:
        raise ParameterError("Monte Carlo oracle handles N_l <= 16")
    rng = np.random.default_rng(seed)
    popcount = np.array([bin(i).count("1") for i in range(1 << N_l)], dtype=np.int16)
    combos = np.array(list(itertools.combinations(range(theta), quorum)), dtype=np.intp)
    weights = (1 << np.arange(N_l)).astype(np.int64)
    worst = np.empty(0, dtype=np.int16)
    chunk = max(1, 2_000_000 // max(1, len(combos)))
    done = 0
    while done < draws:
        n = min(chunk, draws - done)
        order = rng.random((n, theta, N_l)).argsort(axis=2)[:, :, :g]
        masks = weights[order].sum(axis=2)
        unions = np.bitwise_or.reduce(masks[:, combos], axis=2)
        worst = np.concatenate([worst, popcount[unions].min(axis=1)])
        done += n
    return {mu: float(np.mean(worst < N_l - mu + 1)) for mu in mus}
