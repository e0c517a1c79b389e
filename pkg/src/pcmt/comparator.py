"""Closed-form size metrics for 2D-RS, LDPC-coded and polar-coded Merkle trees.

Sizes are in bytes; ``KB`` converts for reporting.  Symbol-size terms are
kept as exact fractions until output.
"""
from __future__ import annotations

import csv
import io
import math
from dataclasses import dataclass
from fractions import Fraction
from typing import Iterable, Mapping, Sequence

from .da_sim import pf_from, sample_budget
from .dispersal import OracleParams, comm_cost, g_star, mu_min
from .errors import PcmtError, ParameterError
from .pcmt_core import PcmtParams, TreePlan, plan_tree

KB = 1000
DP = 3  # maximum CN degree of a polar factor graph

CSV_FIELDS = [
    "scheme", "K", "c", "R", "q", "l",
    "root_size", "X", "ic_proof_size", "decode_complexity", "alpha_source",
    "s", "P_f", "g_star", "comm_cost", "error",
]


@dataclass
class SchemeMetrics:
    scheme: str
    root_size: Fraction
    X: Fraction
    ic_proof_size: Fraction
    decode_complexity: str
    alpha_source: str

    def kb(self) -> dict:
        return {
            "root_size": float(self.root_size) / KB,
            "X": float(self.X) / KB,
            "ic_proof_size": float(self.ic_proof_size) / KB,
        }


def _ceil_log2(x: int) -> int:
    return (x - 1).bit_length() if x > 1 else 0


def metrics_rs2d(K: int, R, b: int, y: int = 32) -> SchemeMetrics:
    R = Fraction(R)
    n_l = Fraction(K) / R
    if n_l.denominator != 1:
        raise ParameterError("K / R must be an integer")
    side = math.isqrt(int(n_l) - 1) + 1  # ceil(sqrt(N_l))
    # ceil(log2 sqrt(N_l)) = ceil(log2(N_l) / 2)
    depth = -(-_ceil_log2(int(n_l)) // 2) if int(n_l) > 1 else 0
    X = Fraction(b, K) + y * depth
    ic = X * (math.isqrt(K - 1) + 1 if K > 1 else 1)
    return SchemeMetrics("rs2d", Fraction(2 * y * side), X, ic, "O(N_l^1.5)", "external")


def metrics_lcmt(K: int, R, q: int, l: int, d_c: int, b: int, y: int = 32) -> SchemeMetrics:
    R = Fraction(R)
    k1 = Fraction(K) / (q * R) ** (l - 1)
    n1 = k1 / R
    if k1.denominator != 1 or n1.denominator != 1:
        raise ParameterError("layer lengths are not integers")
    X = Fraction(b, K) + y * (2 * q - 1) * (l - 1)
    ic = (d_c - 1) * Fraction(b, K) + d_c * y * (q - 1) * (l - 1)
    return SchemeMetrics("lcmt", Fraction(y * int(n1)), X, ic, "O(N_l)", "external")


def _groups(plan: TreePlan) -> list[int]:
    ls = plan.layers
    return [-(-ls[j].tvn // ls[j - 1].k) for j in range(1, len(ls))]


def metrics_pcmt(plan: TreePlan, b: int | None = None, y: int | None = None) -> SchemeMetrics:
    params = plan.params
    b = params.b if b is None else b
    y = params.y if y is None else y
    g = _groups(plan)
    X = Fraction(b, params.K) + y * sum(2 * x - 1 for x in g)
    ic = (DP - 1) * Fraction(b, params.K) + DP * y * sum(x - 1 for x in g)
    name = "prpcmt" if params.pruned else "pcmt"
    return SchemeMetrics(name, Fraction(y * plan.layers[0].tvn), X, ic, "O(TVN_l)", "design")


def sample_download(alphas: Sequence[int], ns: Sequence[int], X, b: int, D_r) -> tuple[int, float]:
    """Sample count under the ``b / D_r`` download budget and the resulting failure probability."""
    s = sample_budget(b, X, D_r)
    return s, pf_from(alphas, ns, s)


def sweep(config: Mapping) -> list[dict]:
    """One row per scheme and grid point; failures become row-level error markers."""
    rows = []
    schemes = config.get("schemes", [])
    q, l = config.get("q", 4), config.get("l", 4)
    y = config.get("y", 32)
    d_c = config.get("d_c", 8)
    D_r = Fraction(str(config.get("D_r", 3)))
    oracle = None
    if "theta" in config:
        oracle = OracleParams(config["theta"], config["beta"], config["gamma"], config["p_th"])
    lcmt_alpha = config.get("lcmt_alpha", {})
    for scheme in schemes:
        for K in config.get("K", []):
            for c in config.get("c", []):
                for R in config.get("R", []):
                    row = {"scheme": scheme, "K": K, "c": c, "R": str(Fraction(str(R))), "q": q, "l": l}
                    try:
                        row.update(_row(scheme, K, c, Fraction(str(R)), q, l, y, d_c, D_r, oracle, lcmt_alpha))
                    except PcmtError as exc:
                        row["error"] = f"{type(exc).__name__}: {exc}"
                    rows.append(row)
    rows.sort(key=lambda r: (r["scheme"], r["K"], r["c"], Fraction(r["R"])))
    return rows


def _row(scheme, K, c, R, q, l, y, d_c, D_r, oracle, lcmt_alpha) -> dict:
    b = c * K
    alphas = ns = None
    if scheme == "rs2d":
        m = metrics_rs2d(K, R, b, y)
    elif scheme == "lcmt":
        m = metrics_lcmt(K, R, q, l, d_c, b, y)
        ext = lcmt_alpha.get(str(K))
        if ext is not None:
            alphas = ext
            ns = [int(Fraction(K) / (q * R) ** (l - j) / R) for j in range(1, l + 1)]
    elif scheme in ("pcmt", "prpcmt"):
        plan = plan_tree(PcmtParams(K, R, q, l, c, pruned=scheme == "prpcmt"))
        m = metrics_pcmt(plan, b, y)
        alphas = [lp.alpha_min for lp in plan.layers]
        ns = [lp.n for lp in plan.layers]
    else:
        raise ParameterError(f"unknown scheme {scheme!r}")
    out = {
        "root_size": float(m.root_size),
        "X": float(m.X),
        "ic_proof_size": float(m.ic_proof_size),
        "decode_complexity": m.decode_complexity,
        "alpha_source": m.alpha_source,
    }
    if alphas is not None:
        s, pf = sample_download(alphas, ns, m.X, b, D_r)
        out.update(s=s, P_f=pf)
        if oracle is not None:
            g = g_star(mu_min(alphas, ns), oracle, ns[-1])
            out.update(g_star=g, comm_cost=comm_cost(g, oracle, math.ceil(m.X)))
    return out


def to_csv(rows: Iterable[Mapping]) -> str:
    buf = io.StringIO()
    writer = csv.DictWriter(buf, fieldnames=CSV_FIELDS, extrasaction="ignore", lineterminator="\n")
    writer.writeheader()
    for r in rows:
        writer.writerow({k: r.get(k, "") for k in CSV_FIELDS})
    return buf.getvalue()


__all__ = [
    "KB",
    "SchemeMetrics",
    "metrics_rs2d",
    "metrics_lcmt",
    "metrics_pcmt",
    "sweep",
    "to_csv",
    "CSV_FIELDS",
]
