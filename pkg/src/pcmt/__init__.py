"""Polar-coded Merkle trees for data-availability sampling."""

from .code_design import CodeDesign, nf_design, prune, sef_design, threshold_lower_bound, tot_vn
from .errors import CapacityError, InfeasibleError, ParameterError, PcmtError, StructuralError
from .pcmt_core import (
    DaAlarm,
    DecodedBlock,
    IcProof,
    MerkleProof,
    Pcmt,
    PcmtParams,
    build,
    hash_aware_decode,
    merkle_proof,
    plan_tree,
    verify_ic_proof,
    verify_inclusion,
)
from .polar_fg import FactorGraph, build_full_fg, stopping_tree, tree_leaf_sizes

__all__ = [
    "CapacityError",
    "CodeDesign",
    "DaAlarm",
    "DecodedBlock",
    "FactorGraph",
    "IcProof",
    "InfeasibleError",
    "MerkleProof",
    "ParameterError",
    "Pcmt",
    "PcmtError",
    "PcmtParams",
    "StructuralError",
    "build",
    "build_full_fg",
    "hash_aware_decode",
    "merkle_proof",
    "nf_design",
    "plan_tree",
    "prune",
    "sef_design",
    "stopping_tree",
    "threshold_lower_bound",
    "tot_vn",
    "tree_leaf_sizes",
    "verify_ic_proof",
    "verify_inclusion",
]
