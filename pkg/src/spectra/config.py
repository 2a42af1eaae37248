"""Tolerances and size guards shared by every module.

All numeric thresholds live here so that tests and the CLI agree on them.
Setting ``SPECTRA_GUARD_OVERRIDE=1`` in the environment unlocks the extended
size guards (symmetric group up to n = 8, larger quantum registers).
"""

from __future__ import annotations

import os
from dataclasses import dataclass


@dataclass(frozen=True)
class Config:
    # dense tables over an Abelian group
    max_dense_order: int = 2**24
    # probability vectors
    prob_sum_tol: float = 1e-9
    clip_budget: float = 1e-9
    # smoothing with a provably nonnegative filter
    nonneg_tol: float = 1e-12
    state_norm_tol: float = 1e-10
    unitary_tol: float = 1e-10
    min_success_prob: float = 1e-12
    integer_tol: float = 1e-9
    # sparse model budget (number of retained frequencies)
    sparse_budget: int = 10**6
    # quantum simulation guards (data qubits)
    max_qubits: int = 20
    max_qubits_override: int = 24
    max_qft_qubits: int = 12
    max_qnn_dim: int = 2**10
    # symmetric group guards
    sn_hard_max: int = 8
    sn_transform_max: int = 6
    sn_transform_override_max: int = 8


CONFIG = Config()


def guard_override() -> bool:
    return os.environ.get("SPECTRA_GUARD_OVERRIDE", "") == "1"
