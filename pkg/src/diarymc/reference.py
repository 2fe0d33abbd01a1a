"""Bundled posterior-mean estimates for three HRT regimens.

Fitted values for two continuous-combined arms (``cc1``, ``cc2``) and one
sequential arm (``sc``), published to two decimals: initial phase and state
probabilities, episode exit intensities (per day; N-phase rates shared
across arms with the first state pinned near-absorbing), and same-phase
one-return transition matrices.  Used by the demos and regression tests;
rows are renormalized exactly on load.
"""

from __future__ import annotations

import numpy as np

from .model import FIXED_N1_RATE, ModelParams, ReducedParams, SharingConfig

ARMS = ("cc1", "cc2", "sc")
TREATMENT_OF_ARM = {"cc1": 1, "cc2": 2, "sc": 3}

# N-phase exit intensities, states 1..4 (state 1 fixed at 1e-5, shown 0.00).
BETA_N = (FIXED_N1_RATE, 0.02, 0.04, 0.10)

# Per arm: S, SB, B exit intensities.
BETA_NONN = {
    "cc1": (0.19, 0.13, 0.75),
    "cc2": (0.24, 0.16, 0.29),
    "sc": (0.33, 0.44, 0.24),
}

P00 = {"cc1": 0.37, "cc2": 0.34, "sc": 0.98}

P0_N = {
    "cc1": (0.07, 0.09, 0.28, 0.56),
    "cc2": (0.11, 0.17, 0.17, 0.56),
    "sc": (0.02, 0.66, 0.31, 0.01),
}

P0_NONN = {
    "cc1": (0.82, 0.14, 0.04),
    "cc2": (0.81, 0.13, 0.06),
    "sc": (0.18, 0.76, 0.06),
}

# Rows: current N state 1..4; columns: next N state after one full cycle.
M_N = {
    "cc1": (
        (0.53, 0.20, 0.14, 0.13),
        (0.35, 0.48, 0.07, 0.09),
        (0.04, 0.22, 0.35, 0.40),
        (0.02, 0.31, 0.07, 0.59),
    ),
    "cc2": (
        (0.64, 0.16, 0.09, 0.11),
        (0.43, 0.43, 0.08, 0.06),
        (0.17, 0.22, 0.39, 0.22),
        (0.02, 0.16, 0.07, 0.75),
    ),
    "sc": (
        (0.27, 0.12, 0.41, 0.19),
        (0.04, 0.56, 0.32, 0.07),
        (0.00, 0.02, 0.82, 0.16),
        (0.00, 0.03, 0.77, 0.19),
    ),
}

# Rows/columns in class order S, SB, B.
M_NONN = {
    "cc1": ((0.89, 0.09, 0.02), (0.63, 0.33, 0.03), (0.18, 0.09, 0.73)),
    "cc2": ((0.91, 0.08, 0.02), (0.81, 0.19, 0.00), (0.71, 0.14, 0.14)),
    "sc": ((0.44, 0.54, 0.02), (0.22, 0.76, 0.03), (0.31, 0.44, 0.25)),
}


def reduced_params() -> ReducedParams:
    """All three arms as one summary-level parameter object."""
    return ReducedParams(
        k=4,
        beta_n=np.array(BETA_N),
        beta_nonn=np.array([BETA_NONN[a] for a in ARMS]),
        m_n=np.array([M_N[a] for a in ARMS]),
        m_nonn=np.array([M_NONN[a] for a in ARMS]),
        p0_n=np.array([P0_N[a] for a in ARMS]),
        p0_nonn=np.array([P0_NONN[a] for a in ARMS]),
        p00=np.array([P00[a] for a in ARMS]),
    )


def full_params(sharing: SharingConfig = SharingConfig()) -> ModelParams:
    """Full parameter set with the one-return matrices broadcast over the
    second-order memory slot (no dependence on the intermediate value).

    Useful as a realistic ground truth for synthetic-data studies."""
    red = reduced_params()
    k = red.k
    p_to_n = np.empty((3, 3, k, k))
    p_to_nonn = np.empty((3, k, 3, 3))
    for tr0 in range(3):
        p_to_n[tr0, :, :, :] = red.m_n[tr0][None, :, :]
        p_to_nonn[tr0, :, :, :] = red.m_nonn[tr0][None, :, :]
    beta_n = red.beta_n[None, :] if sharing.share_beta_n_across_treatments else np.tile(red.beta_n, (3, 1))
    if sharing.share_beta_nonn_across_treatments:
        beta_nonn = red.beta_nonn.mean(axis=0, keepdims=True)
    else:
        beta_nonn = red.beta_nonn
    return ModelParams(
        k=k,
        sharing=sharing,
        beta_n=beta_n,
        beta_nonn=beta_nonn,
        p_to_n=p_to_n,
        p_to_nonn=p_to_nonn,
        p0_n=red.p0_n,
        p0_nonn=red.p0_nonn,
        p00=red.p00,
    )
