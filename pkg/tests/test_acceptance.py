"""Acceptance gate: one PASS/FAIL line per criterion, tolerances and time limits pinned."""
from __future__ import annotations

import itertools
import math
import random

import numpy as np

from acceptance_log import criterion
from pcmt import comparator, da_sim, dispersal
from pcmt.code_design import nf_design, prune_design, sef_design
from pcmt.erasure_codec import check_codeword, peel, pepc_encode_ints
from pcmt.pcmt_core import (
    PcmtParams,
    available_from,
    build,
    build_incorrectly_coded,
    hash_aware_decode,
    IcProof,
    merkle_proof,
    plan_tree,
    verify_ic_proof,
    verify_inclusion,
)
from pcmt.polar_fg import build_full_fg, enumerate_stopping_sets, stopping_tree


def kron_leaf_sizes(N: int) -> list[int]:
    out = np.array([1])
    for _ in range(N.bit_length() - 1):
        out = np.kron(out, [1, 2])
    return out.tolist()


def test_c1_sef_fixture():
    sef_design(6, 3)  # warm caches so the budget measures the design itself
    with criterion(1, "sef_design(6,3) -> N_SEF=4, F={1}", 0.001) as box:
        d = sef_design(6, 3)
        box["ok"] = d.n_sef == 4 and d.frozen == {1}
        box["detail"] = f"N_SEF={d.n_sef} frozen={sorted(d.frozen)}"


def test_c2_leaf_sets_match_kronecker():
    with criterion(2, "stopping-tree leaf sets equal Kronecker entries", 1.0) as box:
        bad = 0
        for N in (2, 4, 8, 16, 32):
            fg = build_full_fg(N)
            ref = kron_leaf_sizes(N)
            for i in range(1, N + 1):
                bad += len(stopping_tree(fg, fg.vn_id(1, i)).leaf_set) != ref[i - 1]
        box["ok"] = bad == 0
        box["detail"] = f"{bad} mismatches over N in 2..32"


def _stalls(fg, erased) -> bool:
    known = {v: 0 for v in fg.coded_vn_ids if v not in erased}
    return bool(peel(fg, known).unresolved)


def test_c3_brute_force_threshold():
    with criterion(3, "enumerated threshold equals min T_N over A, erasure sweep agrees", 120.0) as box:
        problems = []
        pairs = 0
        for N in (2, 4, 8):
            T = kron_leaf_sizes(N)
            for k in range(1, N):
                pairs += 1
                d = nf_design(N, k)
                fg = d.fg
                expected = min(T[i - 1] for i in d.info)
                sets = enumerate_stopping_sets(fg, exclude_frozen_roots=True)
                rooted = [s for s in sets if any(fg.vns[v].col == 1 for v in s.vn_ids)]
                enum_min = min(len(s.leaf_set) for s in rooted)
                coded = fg.coded_vn_ids
                below = all(
                    not _stalls(fg, set(e))
                    for r in range(expected)
                    for e in itertools.combinations(coded, r)
                )
                at = any(_stalls(fg, set(e)) for e in itertools.combinations(coded, expected))
                if not (enum_min == expected == d.alpha_min and below and at):
                    problems.append((N, k, enum_min, expected, below, at))
        box["ok"] = not problems
        box["detail"] = f"{len(problems)} bad (N,k) of {pairs}" + (f" e.g. {problems[0]}" if problems else "")


def test_c4_pepc_validity():
    with criterion(4, "peeling encoder yields valid codewords", 30.0) as box:
        rng = random.Random(4)
        violations = 0
        for trial in range(1000):
            N = rng.randint(2, 64)
            k = rng.randint(1, N - 1)
            d = sef_design(N, k)
            fg = d.fg if trial % 2 else prune_design(d).fg
            data = [rng.getrandbits(64) for _ in range(k)]
            values = pepc_encode_ints(fg, data)
            systematic = [values[v] for v in fg.data_ids] == data
            violations += bool(check_codeword(fg, values)) or not systematic
        box["ok"] = violations == 0
        box["detail"] = f"{violations} violations in 1000 triples"


def test_c5_pruning_equivalence():
    with criterion(5, "pruned and unpruned peeling agree on all erasure patterns", 120.0) as box:
        rng = random.Random(5)
        mismatches = patterns = 0
        for N in range(2, 9):
            for k in range(1, N):
                full = sef_design(N, k).fg
                pruned = prune_design(sef_design(N, k)).fg
                values = pepc_encode_ints(full, [rng.getrandbits(32) for _ in range(k)])
                coded = full.coded_vn_ids
                assert set(coded) == set(pruned.coded_vn_ids)
                for mask in range(1 << len(coded)):
                    known = {v: values[v] for b, v in enumerate(coded) if not mask >> b & 1}
                    a, b_ = peel(full, known), peel(pruned, known)
                    ok_a = all(v in a.values for v in coded)
                    ok_b = all(v in b_.values for v in coded)
                    same = ok_a == ok_b and all(
                        a.values.get(v) == b_.values.get(v) for v in coded if v in a.values or v in b_.values
                    )
                    if ok_a:
                        same &= all(a.values[v] == values[v] for v in coded)
                    mismatches += not same
                    patterns += 1
        box["ok"] = mismatches == 0
        box["detail"] = f"{mismatches} disagreements over {patterns} patterns"


def test_c6_merkle_and_ic_soundness():
    with criterion(6, "honest proofs verify, tampers fail, IC proof is root-bound", 60.0) as box:
        params = PcmtParams(8, "1/2", 4, 3, 16)
        rng = random.Random(6)
        block = rng.randbytes(params.b)
        tree = build(block, params)
        root = tree.root
        total = honest = 0
        for lp in tree.plan.layers:
            for pos in range(1, lp.tvn + 1):
                total += 1
                honest += verify_inclusion((lp.j, pos, tree.symbol(lp.j, pos)), merkle_proof(tree, lp.j, pos), root)

        accepted = 0
        base = tree.plan.base
        for t in range(10_000):
            lp = tree.plan.layer(rng.randint(2, params.l)) if t % 2 else base
            pos = rng.randint(1, lp.tvn)
            sym = bytearray(tree.symbol(lp.j, pos))
            proof = merkle_proof(tree, lp.j, pos)
            if t % 4 < 2 or not proof.elements:
                sym[rng.randrange(len(sym))] ^= rng.randint(1, 255)
            else:
                els = list(proof.elements)
                i = rng.randrange(len(els))
                data = bytearray(els[i].data)
                data[rng.randrange(len(data))] ^= rng.randint(1, 255)
                els[i] = type(els[i])(els[i].layer, els[i].index, bytes(data))
                proof = type(proof)(proof.layer, proof.index, tuple(els))
            accepted += verify_inclusion((lp.j, pos, bytes(sym)), proof, root)

        ic_ok = 0
        positions = [(lp.j, p) for lp in tree.plan.layers for p in lp.coded_positions()]
        other = build(rng.randbytes(params.b), params).root
        for j, pos in positions:
            bad = build_incorrectly_coded(block, params, j, pos)
            proof = hash_aware_decode(bad.root, available_from(bad))
            ic_ok += (
                isinstance(proof, IcProof)
                and verify_ic_proof(proof, bad.root)
                and not verify_ic_proof(proof, root)
                and not verify_ic_proof(proof, other)
            )
        box["ok"] = honest == total and accepted == 0 and ic_ok == len(positions)
        box["detail"] = (
            f"honest {honest}/{total}, tamper acceptances {accepted}/10000, "
            f"IC proofs sound {ic_ok}/{len(positions)}"
        )


def _coverage_violations(params: PcmtParams) -> int:
    plan = plan_tree(params)
    base = plan.base
    positions = list(base.coded_positions())
    n_l = len(positions)
    bad = 0
    for lp in plan.layers:
        if lp.j == base.j:
            continue  # a subset covers itself
        width = lp.tvn + 1
        per = np.zeros((n_l, width), dtype=bool)
        for b, lam in enumerate(positions):
            per[b, lp.di + 1 + (lam - 1) % lp.k] = True
            per[b, lp.di + 1 + lp.k + (lam - 1) % (lp.n - lp.k)] = True
        cover = np.zeros((1 << n_l, width), dtype=bool)
        size = np.zeros(1 << n_l, dtype=np.int64)
        for mask in range(1, 1 << n_l):
            low = (mask & -mask).bit_length() - 1
            cover[mask] = cover[mask & (mask - 1)] | per[low]
            size[mask] = size[mask & (mask - 1)] + 1
        held = cover.sum(axis=1)
        # |S| / N_l * N_j <= held, in integers
        bad += int(np.sum(size * lp.n > held * n_l))
    return bad


def test_c7_repetition_property():
    with criterion(7, "proof coverage meets the repetition property", 120.0) as box:
        cases = [
            PcmtParams(8, "1/2", 4, 3, 8),
            PcmtParams(8, "1/2", 4, 3, 8, pruned=True),
            PcmtParams(8, "1/2", 4, 3, 8, freezing="nf"),
            PcmtParams(8, "1/2", 4, 2, 8),
            PcmtParams(6, "1/2", 4, 2, 8, pruned=True),
            PcmtParams(8, "1/2", 2, 2, 8),
        ]
        total = 0
        for p in cases:
            assert plan_tree(p).base.n <= 16
            v = _coverage_violations(p)
            total += v
        box["ok"] = total == 0
        box["detail"] = f"{total} violating subsets over {len(cases)} trees (exhaustive)"


def test_c8_failure_probability_agreement():
    with criterion(8, "simulated P_f within 3 sigma of (1 - alpha/N)^s", 60.0) as box:
        points = [
            (PcmtParams(8, "1/2", 4, 3, 8), 5),
            (PcmtParams(8, "1/2", 4, 3, 8), 10),
            (PcmtParams(8, "1/2", 4, 3, 8, pruned=True), 20),
            (PcmtParams(8, "1/2", 4, 2, 8), 8),
            (PcmtParams(6, "1/2", 4, 2, 8), 4),
        ]
        trials = 100_000
        worst = 0.0
        ok = True
        for i, (params, s) in enumerate(points):
            plan = plan_tree(params)
            base = plan.base
            attack = da_sim.minimum_tree_attack(plan, base.j)
            ok &= len(attack.hidden) == base.alpha_min
            emp = da_sim.simulate(plan, attack, s, trials, seed=800 + i)
            pf = da_sim.pf_from([base.alpha_min], [base.n], s)
            sigma = math.sqrt(pf * (1 - pf) / trials)
            z = abs(emp - pf) / sigma
            worst = max(worst, z)
            ok &= z <= 3
        box["ok"] = ok
        box["detail"] = f"5 points, worst deviation {worst:.2f} sigma"


def test_c9_dispersal_bound():
    with criterion(9, "Monte Carlo dispersal failure below the bound", 60.0) as box:
        N_l, theta = 8, 10
        over = []
        checked = 0
        for gamma, beta in (("0.2", "0.4"), ("0.5", "0.25")):
            oracle = dispersal.OracleParams(theta, beta, gamma, 1e-8)
            for g in range(1, N_l + 1):
                mc = dispersal.monte_carlo_failure(N_l, theta, oracle.quorum, g, range(1, N_l + 1), 100_000, seed=g)
                for mu, freq in mc.items():
                    bound = dispersal.prob_not_correct(N_l, mu, g, oracle)
                    checked += 1
                    if freq > bound:
                        over.append((gamma, g, mu, freq, bound))
        trivial = all(
            dispersal.raw_alternating_sum(N_l, mu, N_l, 3) == 0 for mu in range(1, N_l + 1)
        )
        hand = dispersal.raw_alternating_sum(2, 1, 1, 1) == 1 and dispersal.raw_alternating_sum(2, 1, 1, 2) == 0.5
        box["ok"] = not over and trivial and hand
        box["detail"] = f"{len(over)}/{checked} cells above the bound, g=N_l zero: {trivial}, N_l=2 cases: {hand}"


def test_c10_reference_size_rows():
    with criterion(10, "2D-RS/LCMT roots exact, PrPCMT root and IC within 5%", 10.0) as box:
        y = 32
        rs = [
            comparator.metrics_rs2d(K, "1/2", 20_000 * K, y).root_size / 1000
            for K in (512, 2048, 4096)
        ]
        rs_ok = [round(float(r), 2) for r in rs] == [2.05, 4.10, 5.82]
        lcmt = comparator.metrics_lcmt(512, "1/2", 4, 6, 8, 20_000 * 512, y).root_size / 1000
        lcmt_ok = round(float(lcmt), 2) == 1.02
        m = comparator.metrics_pcmt(plan_tree(PcmtParams(512, "1/2", 4, 6, 20_000, pruned=True)))
        root_kb = float(m.root_size) / 1000
        ic_kb = float(m.ic_proof_size) / 1000
        pc_ok = abs(root_kb - 2.34) <= 0.05 * 2.34 and abs(ic_kb - 46.1) <= 0.05 * 46.1
        box["ok"] = rs_ok and lcmt_ok and pc_ok
        box["detail"] = (
            f"RS2D roots {[round(float(r), 3) for r in rs]} KB, LCMT root {float(lcmt):.3f} KB, "
            f"PrPCMT root {root_kb:.3f} KB, IC {ic_kb:.3f} KB"
        )


def test_c11_scaling_law():
    with criterion(11, "scaling ratio within 25% of 2*sqrt(R)/D_r at K=2^16", 10.0) as box:
        ratios = {K: da_sim.scaling_ratio(K, "1/2", 3) for K in (2**e for e in range(10, 17))}
        target = da_sim.scaling_limit("1/2", 3)
        last = ratios[2**16]
        rel = abs(last - target) / target
        box["ok"] = rel <= 0.25
        box["detail"] = f"ratio {last:.4f} vs {target:.4f} ({rel:.1%} off)"
