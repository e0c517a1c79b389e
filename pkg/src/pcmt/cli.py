"""Command-line front end.

Exit codes: 0 success, 1 a proof failed to verify, 2 bad parameters,
3 infeasible dispersal, 4 broken internal invariant.
"""
from __future__ import annotations

import argparse
import json
import sys
from fractions import Fraction
from pathlib import Path

from . import comparator, da_sim, dispersal
from .code_design import nf_design, prune_design, sef_design
from .errors import ParameterError, PcmtError
from .pcmt_core import MerkleProof, Pcmt, PcmtParams, build, merkle_proof, plan_tree, verify_inclusion


def _emit(args, text: str) -> None:
    if args.out:
        Path(args.out).write_text(text if text.endswith("\n") else text + "\n")
    else:
        sys.stdout.write(text if text.endswith("\n") else text + "\n")


def _dump(obj) -> str:
    return json.dumps(obj, sort_keys=True, separators=(",", ":"))


def _load_params(path: str, pruned: bool) -> PcmtParams:
    try:
        doc = json.loads(Path(path).read_text())
    except (OSError, json.JSONDecodeError) as exc:
        raise ParameterError(f"cannot read parameters: {exc}") from None
    if pruned:
        doc["pruned"] = True
    return PcmtParams.from_dict(doc)


def _load_tree(path: str) -> Pcmt:
    try:
        blob = Path(path).read_bytes()
    except OSError as exc:
        raise ParameterError(f"cannot read archive: {exc}") from None
    return Pcmt.from_archive(blob)


def cmd_design(args) -> int:
    design = nf_design(args.N, args.k) if args.method == "nf" else sef_design(args.N, args.k)
    if args.pruned:
        design = prune_design(design)
    doc = design.to_dict()
    doc["totVN"] = len(design.fg.vns)
    _emit(args, _dump(doc))
    return 0


def cmd_build(args) -> int:
    params = _load_params(args.params, args.pruned)
    try:
        block = Path(args.block).read_bytes()
    except OSError as exc:
        raise ParameterError(f"cannot read block: {exc}") from None
    tree = build(block, params)
    archive = Path(args.archive or args.block + ".pcmt")
    archive.write_bytes(tree.to_archive())
    header = tree.root.header()
    header["archive"] = str(archive)
    _emit(args, _dump(header))
    return 0


def cmd_prove(args) -> int:
    tree = _load_tree(args.archive)
    proof = merkle_proof(tree, args.layer, args.index)
    doc = {"symbol": tree.symbol(args.layer, args.index).hex(), "proof": proof.to_dict()}
    _emit(args, _dump(doc))
    return 0


def cmd_verify(args) -> int:
    tree = _load_tree(args.archive)
    try:
        doc = json.loads(Path(args.proof).read_text())
        proof = MerkleProof.from_dict(doc["proof"])
        symbol = bytes.fromhex(doc["symbol"])
    except (OSError, KeyError, ValueError, TypeError) as exc:
        raise ParameterError(f"malformed proof file: {exc}") from None
    ok = verify_inclusion((proof.layer, proof.index, symbol), proof, tree.root)
    _emit(args, _dump({"layer": proof.layer, "index": proof.index, "valid": ok}))
    return 0 if ok else 1


def cmd_attack(args) -> int:
    tree = _load_tree(args.archive)
    plan = tree.plan
    attack = da_sim.minimum_tree_attack(plan, args.layer)
    empirical = da_sim.simulate(plan, attack, args.s, args.trials, args.seed, workers=args.workers)
    lp = plan.layer(args.layer)
    p = plan.params
    row = {
        "K": p.K, "R": f"{p.R.numerator}/{p.R.denominator}", "q": p.q, "l": p.l, "layer": args.layer,
        "s": args.s, "analytical_pf": da_sim.pf_from([lp.alpha_min], [lp.n], args.s),
        "empirical_pf": empirical, "trials": args.trials, "seed": args.seed,
    }
    if args.format == "json":
        _emit(args, _dump(row))
    else:
        header = ",".join(row)
        _emit(args, header + "\n" + ",".join(str(v) for v in row.values()))
    return 0


def cmd_disperse(args) -> int:
    tree = _load_tree(args.archive)
    plan = tree.plan
    oracle = dispersal.OracleParams(args.theta, args.beta, args.gamma, args.p_th)
    alphas = [lp.alpha_min for lp in plan.layers]
    ns = [lp.n for lp in plan.layers]
    mu = dispersal.mu_min(alphas, ns)
    g = dispersal.g_star(mu, oracle, ns[-1])
    X = comparator.metrics_pcmt(plan).X
    report = {
        "N_l": ns[-1], "mu_min": mu, "theta": oracle.theta, "beta": float(oracle.beta),
        "gamma": float(oracle.gamma), "p_th": oracle.p_th, "g_star": g, "g_is_N_l": g == ns[-1],
        "X": float(X), "comm_cost_bytes": float(oracle.theta * g * X),
    }
    _emit(args, _dump(report))
    return 0


def cmd_metrics(args) -> int:
    R = Fraction(args.R)
    b = args.c * args.K
    if args.scheme == "rs2d":
        m = comparator.metrics_rs2d(args.K, R, b)
    elif args.scheme == "lcmt":
        m = comparator.metrics_lcmt(args.K, R, args.q, args.l, args.d_c, b)
    else:
        pruned = args.pruned or args.scheme == "prpcmt"
        m = comparator.metrics_pcmt(plan_tree(PcmtParams(args.K, R, args.q, args.l, args.c, pruned=pruned)))
    doc = {
        "scheme": m.scheme, "root_size": float(m.root_size), "X": float(m.X),
        "ic_proof_size": float(m.ic_proof_size), "decode_complexity": m.decode_complexity,
        "alpha_source": m.alpha_source,
    }
    _emit(args, _dump(doc))
    return 0


def cmd_sweep(args) -> int:
    try:
        config = json.loads(Path(args.config).read_text())
    except (OSError, json.JSONDecodeError) as exc:
        raise ParameterError(f"cannot read sweep config: {exc}") from None
    rows = comparator.sweep(config)
    _emit(args, _dump(rows) if args.format == "json" else comparator.to_csv(rows))
    return 0


def build_parser() -> argparse.ArgumentParser:
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--seed", type=int, default=0, help="master seed for every random draw")
    common.add_argument("--format", choices=("json", "csv"), default=None)
    common.add_argument("--out", help="write output here instead of stdout")
    common.add_argument("--pruned", action="store_true", help="use pruned factor graphs")

    parser = argparse.ArgumentParser(prog="pcmt", description="Polar-coded Merkle tree toolkit")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("design", parents=[common], help="frozen-set design for an (N, k) code")
    p.add_argument("N", type=int)
    p.add_argument("k", type=int)
    p.add_argument("--method", choices=("sef", "nf"), default="sef")
    p.set_defaults(func=cmd_design)

    p = sub.add_parser("build", parents=[common], help="encode a block into a tree archive")
    p.add_argument("block")
    p.add_argument("params", help="JSON file with K, R, q, l, c")
    p.add_argument("--archive", help="archive path (default: BLOCK.pcmt)")
    p.set_defaults(func=cmd_build)

    p = sub.add_parser("prove", parents=[common], help="Merkle proof of one symbol")
    p.add_argument("archive")
    p.add_argument("layer", type=int)
    p.add_argument("index", type=int)
    p.set_defaults(func=cmd_prove)

    p = sub.add_parser("verify", parents=[common], help="check a proof file against an archive root")
    p.add_argument("archive")
    p.add_argument("proof")
    p.set_defaults(func=cmd_verify)

    p = sub.add_parser("attack", parents=[common], help="simulate light-node sampling against a hiding attack")
    p.add_argument("archive")
    p.add_argument("--layer", type=int, required=True)
    p.add_argument("--s", type=int, required=True, help="samples per light node")
    p.add_argument("--trials", type=int, default=100_000)
    p.add_argument("--workers", type=int, default=None)
    p.set_defaults(func=cmd_attack)

    p = sub.add_parser("disperse", parents=[common], help="dispersal design for an oracle committee")
    p.add_argument("archive")
    p.add_argument("--theta", type=int, required=True)
    p.add_argument("--beta", type=str, required=True)
    p.add_argument("--gamma", type=str, required=True)
    p.add_argument("--p-th", dest="p_th", type=float, required=True)
    p.set_defaults(func=cmd_disperse)

    p = sub.add_parser("metrics", parents=[common], help="closed-form size metrics")
    p.add_argument("--scheme", choices=("rs2d", "lcmt", "pcmt", "prpcmt"), required=True)
    p.add_argument("--K", type=int, required=True)
    p.add_argument("--R", type=str, default="1/2")
    p.add_argument("--q", type=int, default=4)
    p.add_argument("--l", type=int, default=4)
    p.add_argument("--c", type=int, required=True, help="data symbol size in bytes")
    p.add_argument("--d-c", dest="d_c", type=int, default=8)
    p.set_defaults(func=cmd_metrics)

    p = sub.add_parser("sweep", parents=[common], help="metrics over a parameter grid")
    p.add_argument("config")
    p.set_defaults(func=cmd_sweep)
    return parser


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    if args.format is None:
        args.format = "csv" if args.command in ("attack", "sweep") else "json"
    try:
        return args.func(args)
    except PcmtError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return exc.exit_code
    except (ValueError, ZeroDivisionError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return ParameterError.exit_code


if __name__ == "__main__":
    sys.exit(main())
