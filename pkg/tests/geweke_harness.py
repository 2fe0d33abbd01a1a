"""Successive-conditional sampler consistency harness.

Two samplers target the same joint over (parameters, complete data):

  (a) marginal-conditional: parameters drawn fresh from the prior;
  (b) successive-conditional: one latent sweep + the conjugate parameter
      updates given the current data, then data regenerated from the new
      parameters.

If the sweep and updates are correct, parameter moments from both chains
agree; a bug in either shifts the stationary distribution.
"""

from __future__ import annotations

import numpy as np

from diarymc import _kernels
from diarymc.model import FIXED_N1_RATE, ModelParams, PriorConfig, SharingConfig
from diarymc.sampler import (
    PackedSubject,
    _ExpandedParams,
    _tally_packed,
    ess_geyer,
    flatten_params,
    update_initial_probs,
    update_intensities,
    update_phase_prob,
    update_transition_probs,
)


def sample_prior_params(rng, k, sharing=SharingConfig(), prior=PriorConfig()) -> ModelParams:
    """Exact prior draw; ordered N rates by sort-and-reject above the pin."""
    gn, gb = sharing.n_groups_n, sharing.n_groups_nonn
    beta_n = np.empty((gn, k))
    for g in range(gn):
        while True:
            draws = np.sort(rng.gamma(prior.gamma_shape, 1.0 / prior.gamma_rate, size=k - 1))
            if k == 1 or draws[0] >= FIXED_N1_RATE:
                break
        beta_n[g, 0] = FIXED_N1_RATE
        beta_n[g, 1:] = draws
    beta_nonn = rng.gamma(prior.gamma_shape, 1.0 / prior.gamma_rate, size=(gb, 3))

    def rows(shape):
        g = rng.gamma(prior.dirichlet_concentration, size=shape)
        return g / g.sum(axis=-1, keepdims=True)

    return ModelParams(
        k=k,
        sharing=sharing,
        beta_n=beta_n,
        beta_nonn=np.maximum(beta_nonn, 1e-300),
        p_to_n=rows((3, 3, k, k)),
        p_to_nonn=rows((3, k, 3, 3)),
        p0_n=rows((3, k)),
        p0_nonn=rows((3, 3)),
        p00=rng.random(3),
    )


def generate_packed(params: ModelParams, arms, horizon, rng) -> list[PackedSubject]:
    """Fresh complete data: simulate each subject, erase what an observer
    cannot see (N states resampled anyway; censored final class gets the
    full candidate set)."""
    ex = _ExpandedParams(params)
    p00 = np.ascontiguousarray(params.p00)
    out = []
    for i, tr in enumerate(arms):
        phases, values, durs = _kernels.simulate_full(
            params.k, tr - 1, horizon, ex.beta_n, ex.beta_b,
            ex.p_to_n, ex.p_to_b, ex.p0_n, ex.p0_b, p00, -1, -1, -1, rng,
        )
        n = len(phases)
        event = np.ones(n, dtype=np.int8)
        event[-1] = 0
        cand = np.zeros(n, dtype=np.uint8)
        for j in range(n):
            if phases[j] == 0:
                cand[j] = 0b111 if j == n - 1 else np.uint8(1 << values[j])
        out.append(
            PackedSubject(
                subject_id=f"g{i}", tr0=tr - 1, phase=phases, dur=durs,
                event=event, value=values, cand_mask=cand,
            )
        )
    return out


def successive_conditional_chain(
    n_iter, seed, k=2, arms=(1, 1, 2, 3, 3), horizon=90.0,
    sharing=SharingConfig(), prior=PriorConfig(),
):
    """Run chain (b); returns (names, matrix of flattened params)."""
    rng = np.random.Generator(np.random.PCG64(seed))
    params = sample_prior_params(rng, k, sharing, prior)
    packed = generate_packed(params, arms, horizon, rng)
    names = list(flatten_params(params).keys())
    X = np.empty((n_iter, len(names)))
    for it in range(n_iter):
        ex = _ExpandedParams(params)
        for p in packed:
            _kernels.sweep_subject(
                p.phase, p.dur, p.event, p.value, p.cand_mask, p.tr0,
                ex.beta_n, ex.lbeta_n, ex.beta_b, ex.lbeta_b,
                ex.p_to_n, ex.p_to_b, ex.p0_n, ex.p0_b, rng,
            )
        stats = _tally_packed(packed, k)
        upd = update_intensities(stats, prior, sharing, params.beta_n, rng)
        p_to_n, p_to_nonn = update_transition_probs(stats, prior, rng)
        p0_n, p0_nonn = update_initial_probs(stats, prior, rng)
        p00 = update_phase_prob(stats, rng)
        params = ModelParams(
            k=k, sharing=sharing, beta_n=upd.beta_n, beta_nonn=upd.beta_nonn,
            p_to_n=p_to_n, p_to_nonn=p_to_nonn, p0_n=p0_n, p0_nonn=p0_nonn, p00=p00,
        )
        flat = flatten_params(params)
        X[it] = [flat[n] for n in names]
        packed = generate_packed(params, arms, horizon, rng)
    return names, X


def prior_chain(n_iter, seed, k=2, sharing=SharingConfig(), prior=PriorConfig()):
    rng = np.random.Generator(np.random.PCG64(seed))
    params = sample_prior_params(rng, k, sharing, prior)
    names = list(flatten_params(params).keys())
    X = np.empty((n_iter, len(names)))
    for it in range(n_iter):
        flat = flatten_params(sample_prior_params(rng, k, sharing, prior))
        X[it] = [flat[n] for n in names]
    return names, X


def moment_zscores(prior_X, chain_X):
    """|mean difference| / combined MC standard error, for first and second
    moments of every scalar.  The prior chain is iid; the Gibbs chain's
    standard errors use its effective sample size."""
    out = []
    for power in (1, 2):
        a = prior_X**power
        b = chain_X**power
        se_a = a.std(axis=0) / np.sqrt(len(a))
        ess = np.array([ess_geyer(b[:, j]) for j in range(b.shape[1])])
        se_b = b.std(axis=0) / np.sqrt(ess)
        denom = np.sqrt(se_a**2 + se_b**2)
        denom[denom == 0] = np.inf
        out.append(np.abs(a.mean(axis=0) - b.mean(axis=0)) / denom)
    return np.stack(out)
