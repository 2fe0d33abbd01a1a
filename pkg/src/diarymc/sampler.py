"""Single-site Gibbs sampler over latent states, censored classes, and
all model parameters.

The latent layer is resampled one episode at a time in subject order then
episode order; parameter blocks then follow their conjugate full
conditionals: Gamma for intensities (truncated single-site draws for the
ordered N-phase rates), Dirichlet for transition and initial rows, Beta for
the initial phase probability.
"""

from __future__ import annotations

import json
import math
from dataclasses import dataclass
from pathlib import Path
from typing import Iterable, Sequence

import numpy as np
from scipy import special as sc

from . import _kernels
from ._kernels import _pure
from .diary import Episode, EpisodeSequence, Phase
from .errors import (
    AllZeroMass,
    ChainDiverged,
    EmptyDataset,
    EmptyDraws,
    TooFewDraws,
)
from .model import (
    FIXED_N1_RATE,
    ModelParams,
    N_CLASSES,
    PriorConfig,
    SharingConfig,
    init_params,
    params_from_dict,
    params_to_dict,
    validate_params,
)

CLASS_NAMES = ("S", "SB", "B")


@dataclass(frozen=True)
class ChainConfig:
    burn_in: int = 5000
    draws: int = 5000
    thin: int = 5
    chains: int = 2
    seed: int = 1729
    k: int = 4
    sharing: SharingConfig = SharingConfig()
    prior: PriorConfig = PriorConfig()
    store_latents: bool = False

    def __post_init__(self):
        if self.burn_in < 0 or self.draws < 1 or self.thin < 1 or self.chains < 1:
            raise ValueError("burn_in >= 0 and draws, thin, chains >= 1 required")
        if self.k < 1:
            raise ValueError("k >= 1 required")


@dataclass
class PackedSubject:
    """Array view of one subject's episodes used by the kernels."""

    subject_id: str
    tr0: int
    phase: np.ndarray  # int8, 1 = N
    dur: np.ndarray  # float64
    event: np.ndarray  # int8, 1 = uncensored
    value: np.ndarray  # int64, 0-based; -1 = unassigned
    cand_mask: np.ndarray  # uint8 bitmask over classes (censored non-N only)

    @property
    def n_free(self) -> int:
        free = int((self.phase == 1).sum())
        for j in range(len(self.phase)):
            if self.phase[j] == 0 and self.event[j] == 0:
                if bin(int(self.cand_mask[j])).count("1") >= 2:
                    free += 1
        return free


def _candidate_mask(ep: Episode) -> int:
    if ep.candidates is None:
        if ep.observed_class is not None:
            return 1 << (ep.observed_class.value - 1)
        return 0
    mask = 0
    for c in ep.candidates:
        mask |= 1 << (c.value - 1)
    return mask


def pack_subject(seq: EpisodeSequence, values=None) -> PackedSubject:
    n = len(seq.episodes)
    phase = np.empty(n, dtype=np.int8)
    dur = np.empty(n, dtype=np.float64)
    event = np.empty(n, dtype=np.int8)
    value = np.full(n, -1, dtype=np.int64)
    cand = np.zeros(n, dtype=np.uint8)
    for j, ep in enumerate(seq.episodes):
        phase[j] = 1 if ep.phase is Phase.N else 0
        dur[j] = ep.duration_days
        event[j] = 0 if ep.censored else 1
        cand[j] = _candidate_mask(ep)
        if ep.phase is Phase.N:
            if ep.latent_class is not None:
                value[j] = ep.latent_class - 1
        elif ep.observed_class is not None:
            value[j] = ep.observed_class.value - 1
        elif ep.candidates is not None and len(ep.candidates) == 1:
            value[j] = next(iter(ep.candidates)).value - 1
    if values is not None:
        value[:] = np.asarray(values, dtype=np.int64)
    return PackedSubject(
        subject_id=seq.subject_id,
        tr0=seq.treatment - 1,
        phase=phase,
        dur=dur,
        event=event,
        value=value,
        cand_mask=cand,
    )


def seed_assignment(packed: PackedSubject, k: int, rng: np.random.Generator) -> None:
    """Fill unassigned slots uniformly (N states; censored classes from
    their candidate sets) so a chain can start."""
    for j in range(len(packed.phase)):
        if packed.value[j] >= 0:
            continue
        if packed.phase[j] == 1:
            packed.value[j] = int(rng.integers(0, k))
        else:
            allowed = [c for c in range(N_CLASSES) if (int(packed.cand_mask[j]) >> c) & 1]
            packed.value[j] = allowed[int(rng.integers(0, len(allowed)))]


# LatentAssignment: mapping subject_id -> 0-based per-episode value array.
LatentAssignment = dict


def initial_assignment(
    dataset: Sequence[EpisodeSequence], k: int, rng: np.random.Generator
) -> LatentAssignment:
    out = {}
    for seq in dataset:
        p = pack_subject(seq)
        seed_assignment(p, k, rng)
        out[seq.subject_id] = p.value
    return out


class _ExpandedParams:
    """Per-treatment views plus log intensities, computed once per sweep."""

    def __init__(self, params: ModelParams):
        self.k = params.k
        self.beta_n = np.ascontiguousarray(params.beta_n_by_tr())
        self.beta_b = np.ascontiguousarray(params.beta_nonn_by_tr())
        self.lbeta_n = np.log(self.beta_n)
        self.lbeta_b = np.log(self.beta_b)
        self.p_to_n = np.ascontiguousarray(params.p_to_n)
        self.p_to_b = np.ascontiguousarray(params.p_to_nonn)
        self.p0_n = np.ascontiguousarray(params.p0_n)
        self.p0_b = np.ascontiguousarray(params.p0_nonn)


def latent_full_conditional(
    j: int, seq: EpisodeSequence, assign, params: ModelParams
) -> np.ndarray:
    """Full-conditional distribution of episode ``j``'s value (0-based index).

    Returns a probability vector over the episode's whole alphabet (k latent
    states for an N episode, the three classes for a censored non-N one)
    with zero mass outside the admissible candidates.
    """
    values = assign[seq.subject_id] if isinstance(assign, dict) else assign
    packed = pack_subject(seq, values=values)
    ex = _ExpandedParams(params)
    w = _pure._slot_weights(
        j, packed.phase, packed.dur, packed.event, packed.value, packed.cand_mask,
        packed.tr0, ex.beta_n, ex.lbeta_n, ex.beta_b, ex.lbeta_b,
        ex.p_to_n, ex.p_to_b, ex.p0_n, ex.p0_b,
    )
    total = w.sum()
    if not total > 0:
        raise AllZeroMass(f"episode {j + 1}: no admissible value")
    return w / total


def sweep_latents(
    dataset: Sequence[EpisodeSequence],
    assign: LatentAssignment,
    params: ModelParams,
    rng: np.random.Generator,
) -> LatentAssignment:
    """One systematic scan over every free slot; returns a new assignment."""
    ex = _ExpandedParams(params)
    out = {}
    for seq in dataset:
        packed = pack_subject(seq, values=assign[seq.subject_id])
        _kernels.sweep_subject(
            packed.phase, packed.dur, packed.event, packed.value, packed.cand_mask,
            packed.tr0, ex.beta_n, ex.lbeta_n, ex.beta_b, ex.lbeta_b,
            ex.p_to_n, ex.p_to_b, ex.p0_n, ex.p0_b, rng,
        )
        out[seq.subject_id] = packed.value
    return out


@dataclass
class SufficientStats:
    """Event counts and exposures per intensity cell, transition and initial
    counts, and first-episode phase counts, all per treatment arm."""

    k: int
    n_n: np.ndarray  # (3, k) uncensored episode counts
    t_n: np.ndarray  # (3, k) exposure
    n_nonn: np.ndarray  # (3, 3)
    t_nonn: np.ndarray  # (3, 3)
    cnt_to_n: np.ndarray  # (3, 3, k, k)
    cnt_to_nonn: np.ndarray  # (3, k, 3, 3)
    init_n: np.ndarray  # (3, k)
    init_nonn: np.ndarray  # (3, 3)
    start_counts: np.ndarray  # (3, 2), column 1 = started in N

    @classmethod
    def zeros(cls, k: int) -> "SufficientStats":
        return cls(
            k=k,
            n_n=np.zeros((3, k)),
            t_n=np.zeros((3, k)),
            n_nonn=np.zeros((3, N_CLASSES)),
            t_nonn=np.zeros((3, N_CLASSES)),
            cnt_to_n=np.zeros((3, N_CLASSES, k, k)),
            cnt_to_nonn=np.zeros((3, k, N_CLASSES, N_CLASSES)),
            init_n=np.zeros((3, k)),
            init_nonn=np.zeros((3, N_CLASSES)),
            start_counts=np.zeros((3, 2)),
        )

    def pooled_n(self, sharing: SharingConfig):
        if sharing.share_beta_n_across_treatments:
            return self.n_n.sum(axis=0, keepdims=True), self.t_n.sum(axis=0, keepdims=True)
        return self.n_n, self.t_n

    def pooled_nonn(self, sharing: SharingConfig):
        if sharing.share_beta_nonn_across_treatments:
            return (
                self.n_nonn.sum(axis=0, keepdims=True),
                self.t_nonn.sum(axis=0, keepdims=True),
            )
        return self.n_nonn, self.t_nonn


def _tally_packed(packed_list: Iterable[PackedSubject], k: int) -> SufficientStats:
    stats = SufficientStats.zeros(k)
    for p in packed_list:
        _kernels.tally_subject(
            p.phase, p.dur, p.event, p.value, p.tr0,
            stats.n_n, stats.t_n, stats.n_nonn, stats.t_nonn,
            stats.cnt_to_n, stats.cnt_to_nonn, stats.init_n, stats.init_nonn,
            stats.start_counts,
        )
    return stats


def accumulate_sufficient_stats(
    dataset: Sequence[EpisodeSequence], assign: LatentAssignment, k: int
) -> SufficientStats:
    packed = [pack_subject(seq, values=assign[seq.subject_id]) for seq in dataset]
    for p in packed:
        if np.any(p.value < 0):
            raise ValueError(f"subject {p.subject_id!r}: unassigned slots")
    return _tally_packed(packed, k)


def truncated_gamma(
    rng: np.random.Generator, shape: float, rate: float, lo: float, hi: float
):
    """Draw Gamma(shape, rate) restricted to [lo, hi] by CDF inversion.

    Falls back to rejection when the interval mass is below 1e-12; returns
    None when both routes fail (caller keeps the current value).
    """
    a = sc.gammainc(shape, rate * lo) if lo > 0 else 0.0
    b = sc.gammainc(shape, rate * hi) if math.isfinite(hi) else 1.0
    mass = b - a
    if mass >= 1e-12:
        u = rng.random()
        q = min(max(a + u * mass, 1e-300), 1.0 - 1e-16)
        x = float(sc.gammaincinv(shape, q)) / rate
        if math.isfinite(x):
            return min(max(x, lo), hi)
    for _ in range(100):
        x = rng.gamma(shape, 1.0 / rate)
        if lo <= x <= hi:
            return x
    return None


@dataclass
class IntensityUpdate:
    beta_n: np.ndarray
    beta_nonn: np.ndarray
    truncation_failures: int


def update_intensities(
    stats: SufficientStats,
    prior: PriorConfig,
    sharing: SharingConfig,
    current_beta_n: np.ndarray,
    rng: np.random.Generator,
) -> IntensityUpdate:
    """Conjugate Gamma draws; ordered N-phase rates via single-site
    truncation between their neighbours, index 1 pinned at 1e-5."""
    k = stats.k
    n_g, t_g = stats.pooled_n(sharing)
    beta_n = np.array(current_beta_n, dtype=float)
    failures = 0
    for g in range(beta_n.shape[0]):
        beta_n[g, 0] = FIXED_N1_RATE
        for l in range(1, k):
            shape = prior.gamma_shape + n_g[g, l]
            rate = prior.gamma_rate + t_g[g, l]
            lo = beta_n[g, l - 1]
            hi = beta_n[g, l + 1] if l + 1 < k else math.inf
            x = truncated_gamma(rng, shape, rate, lo, hi)
            if x is None:
                failures += 1
            else:
                beta_n[g, l] = x

    nb, tb = stats.pooled_nonn(sharing)
    shape = prior.gamma_shape + nb
    rate = prior.gamma_rate + tb
    beta_nonn = rng.gamma(shape, 1.0 / rate)
    return IntensityUpdate(beta_n=beta_n, beta_nonn=beta_nonn, truncation_failures=failures)


def _dirichlet_rows(counts: np.ndarray, conc: float, rng: np.random.Generator) -> np.ndarray:
    g = rng.gamma(conc + counts)
    return g / g.sum(axis=-1, keepdims=True)


def update_transition_probs(
    stats: SufficientStats, prior: PriorConfig, rng: np.random.Generator
):
    p_to_n = _dirichlet_rows(stats.cnt_to_n, prior.dirichlet_concentration, rng)
    p_to_nonn = _dirichlet_rows(stats.cnt_to_nonn, prior.dirichlet_concentration, rng)
    return p_to_n, p_to_nonn


def update_initial_probs(
    stats: SufficientStats, prior: PriorConfig, rng: np.random.Generator
):
    p0_n = _dirichlet_rows(stats.init_n, prior.dirichlet_concentration, rng)
    p0_nonn = _dirichlet_rows(stats.init_nonn, prior.dirichlet_concentration, rng)
    return p0_n, p0_nonn


def update_phase_prob(stats: SufficientStats, rng: np.random.Generator) -> np.ndarray:
    return rng.beta(1.0 + stats.start_counts[:, 1], 1.0 + stats.start_counts[:, 0])


def complete_loglik_from_stats(stats: SufficientStats, params: ModelParams) -> float:
    """Complete-data log likelihood assembled from sufficient statistics."""
    n_g, t_g = stats.pooled_n(params.sharing)
    nb, tb = stats.pooled_nonn(params.sharing)
    total = float(
        (n_g * np.log(params.beta_n) - params.beta_n * t_g).sum()
        + (nb * np.log(params.beta_nonn) - params.beta_nonn * tb).sum()
        + sc.xlogy(stats.cnt_to_n, params.p_to_n).sum()
        + sc.xlogy(stats.cnt_to_nonn, params.p_to_nonn).sum()
        + sc.xlogy(stats.init_n, params.p0_n).sum()
        + sc.xlogy(stats.init_nonn, params.p0_nonn).sum()
        + sc.xlogy(stats.start_counts[:, 1], params.p00).sum()
        + sc.xlogy(stats.start_counts[:, 0], 1.0 - params.p00).sum()
    )
    return total


@dataclass
class PosteriorDraws:
    """Stored MCMC sample: one ModelParams per retained iteration."""

    params: list
    chain: np.ndarray
    iteration: np.ndarray
    loglik: np.ndarray
    config: ChainConfig
    truncation_failures: int = 0
    backend: str = _kernels.BACKEND
    latents: list | None = None

    def __len__(self) -> int:
        return len(self.params)


def gibbs_run(dataset: Sequence[EpisodeSequence], config: ChainConfig) -> PosteriorDraws:
    """Run the full sampler; deterministic given (dataset, config).

    Chains are independent, chain ``c`` seeded with ``seed + c``.  Every
    stored draw satisfies :func:`validate_params`.
    """
    dataset = list(dataset)
    if not dataset:
        raise EmptyDataset("no subjects to fit")
    k = config.k
    all_params: list[ModelParams] = []
    all_chain: list[int] = []
    all_iter: list[int] = []
    all_loglik: list[float] = []
    all_latents: list[dict] | None = [] if config.store_latents else None
    failures = 0

    for chain in range(config.chains):
        rng = np.random.Generator(np.random.PCG64(config.seed + chain))
        params = init_params(dataset, config.prior, k, config.sharing, rng)
        packed = [pack_subject(seq) for seq in dataset]
        for p in packed:
            seed_assignment(p, k, rng)

        total_iters = config.burn_in + config.draws * config.thin
        for it in range(total_iters):
            ex = _ExpandedParams(params)
            for p in packed:
                _kernels.sweep_subject(
                    p.phase, p.dur, p.event, p.value, p.cand_mask, p.tr0,
                    ex.beta_n, ex.lbeta_n, ex.beta_b, ex.lbeta_b,
                    ex.p_to_n, ex.p_to_b, ex.p0_n, ex.p0_b, rng,
                )
            stats = _tally_packed(packed, k)
            upd = update_intensities(stats, config.prior, config.sharing, params.beta_n, rng)
            failures += upd.truncation_failures
            p_to_n, p_to_nonn = update_transition_probs(stats, config.prior, rng)
            p0_n, p0_nonn = update_initial_probs(stats, config.prior, rng)
            p00 = update_phase_prob(stats, rng)
            params = ModelParams(
                k=k,
                sharing=config.sharing,
                beta_n=upd.beta_n,
                beta_nonn=upd.beta_nonn,
                p_to_n=p_to_n,
                p_to_nonn=p_to_nonn,
                p0_n=p0_n,
                p0_nonn=p0_nonn,
                p00=p00,
            )
            post = it - config.burn_in
            if post >= 0 and (post + 1) % config.thin == 0:
                ll = complete_loglik_from_stats(stats, params)
                if not math.isfinite(ll):
                    raise ChainDiverged(f"chain {chain} iteration {it}: loglik {ll}")
                report = validate_params(params)
                if not report.ok:
                    raise ChainDiverged(f"chain {chain} iteration {it}: {report}")
                all_params.append(params)
                all_chain.append(chain)
                all_iter.append(it)
                all_loglik.append(ll)
                if all_latents is not None:
                    all_latents.append(
                        {p.subject_id: p.value.copy() for p in packed}
                    )

    return PosteriorDraws(
        params=all_params,
        chain=np.asarray(all_chain),
        iteration=np.asarray(all_iter),
        loglik=np.asarray(all_loglik),
        config=config,
        truncation_failures=failures,
        latents=all_latents,
    )


# --- draw persistence -----------------------------------------------------


def save_draws(draws: PosteriorDraws, path, latents_path=None) -> None:
    """Write one JSON line per stored draw: {iter, chain, params, loglik}."""
    with Path(path).open("w", newline="\n") as fh:
        for i in range(len(draws)):
            rec = {
                "iter": int(draws.iteration[i]),
                "chain": int(draws.chain[i]),
                "params": params_to_dict(draws.params[i]),
                "loglik": float(draws.loglik[i]),
            }
            fh.write(json.dumps(rec, sort_keys=True) + "\n")
    if latents_path is not None and draws.latents is not None:
        with Path(latents_path).open("w", newline="\n") as fh:
            for i in range(len(draws)):
                rec = {
                    "iter": int(draws.iteration[i]),
                    "chain": int(draws.chain[i]),
                    "latents": {k: v.tolist() for k, v in draws.latents[i].items()},
                }
                fh.write(json.dumps(rec, sort_keys=True) + "\n")


def load_draws(path) -> PosteriorDraws:
    params, chains, iters, logliks = [], [], [], []
    with Path(path).open() as fh:
        for lineno, line in enumerate(fh, start=1):
            line = line.strip()
            if not line:
                continue
            try:
                rec = json.loads(line)
                params.append(params_from_dict(rec["params"]))
                chains.append(int(rec["chain"]))
                iters.append(int(rec["iter"]))
                logliks.append(float(rec["loglik"]))
            except (json.JSONDecodeError, KeyError) as exc:
                raise EmptyDraws(f"{path}: bad draw record at line {lineno}: {exc}") from None
    if not params:
        raise EmptyDraws(f"{path}: no draws")
    first = params[0]
    return PosteriorDraws(
        params=params,
        chain=np.asarray(chains),
        iteration=np.asarray(iters),
        loglik=np.asarray(logliks),
        config=ChainConfig(
            burn_in=0, draws=len(params), thin=1, chains=len(set(chains)),
            k=first.k, sharing=first.sharing,
        ),
    )


# --- diagnostics -----------------------------------------------------------


def flatten_params(params: ModelParams) -> dict:
    """Stable name -> value mapping over the free scalars of one draw."""
    out = {}
    for g in range(params.beta_n.shape[0]):
        for l in range(1, params.k):
            out[f"beta_N[g{g + 1},{l + 1}]"] = float(params.beta_n[g, l])
    for g in range(params.beta_nonn.shape[0]):
        for m in range(N_CLASSES):
            out[f"beta_nonN[g{g + 1},{CLASS_NAMES[m]}]"] = float(params.beta_nonn[g, m])
    for tr in range(3):
        for m in range(N_CLASSES):
            for l2 in range(params.k):
                for l in range(params.k):
                    out[f"P_toN[tr{tr + 1},{CLASS_NAMES[m]},{l2 + 1},{l + 1}]"] = float(
                        params.p_to_n[tr, m, l2, l]
                    )
    for tr in range(3):
        for l in range(params.k):
            for m2 in range(N_CLASSES):
                for m in range(N_CLASSES):
                    out[
                        f"P_toNonN[tr{tr + 1},{l + 1},{CLASS_NAMES[m2]},{CLASS_NAMES[m]}]"
                    ] = float(params.p_to_nonn[tr, l, m2, m])
    for tr in range(3):
        for l in range(params.k):
            out[f"P0_N[tr{tr + 1},{l + 1}]"] = float(params.p0_n[tr, l])
        for m in range(N_CLASSES):
            out[f"P0_nonN[tr{tr + 1},{CLASS_NAMES[m]}]"] = float(params.p0_nonn[tr, m])
        out[f"P00[tr{tr + 1}]"] = float(params.p00[tr])
    return out


def scalar_matrix(draws: PosteriorDraws):
    """(names, X) with X of shape (n_draws, n_scalars)."""
    names = list(flatten_params(draws.params[0]).keys())
    X = np.empty((len(draws), len(names)))
    for i, p in enumerate(draws.params):
        flat = flatten_params(p)
        for j, name in enumerate(names):
            X[i, j] = flat[name]
    return names, X


def ess_geyer(x: np.ndarray) -> float:
    """Effective sample size via the initial positive sequence estimator.

    A constant series reports its length (documented convention)."""
    x = np.asarray(x, dtype=float)
    n = len(x)
    if n < 2:
        return float(n)
    var = x.var()
    if var == 0:
        return float(n)
    nfft = 1 << (2 * n - 1).bit_length()
    f = np.fft.rfft(x - x.mean(), nfft)
    acov = np.fft.irfft(f * np.conj(f), nfft)[:n].real / n
    rho = acov / acov[0]
    tau = 1.0
    t = 1
    while t + 1 < n:
        pair = rho[t] + rho[t + 1]
        if pair <= 0:
            break
        tau += 2.0 * pair
        t += 2
    return float(min(n, max(1.0, n / tau)))


def split_rhat(chains: list[np.ndarray]) -> float:
    """Split-chain shrink factor; 1.0 for constant series."""
    halves = []
    for c in chains:
        c = np.asarray(c, dtype=float)
        h = len(c) // 2
        if h >= 1:
            halves.append(c[:h])
            halves.append(c[h : 2 * h])
    if len(halves) < 2:
        return 1.0
    m = len(halves)
    n = min(len(h) for h in halves)
    halves = [h[:n] for h in halves]
    means = np.array([h.mean() for h in halves])
    variances = np.array([h.var(ddof=1) if n > 1 else 0.0 for h in halves])
    w = variances.mean()
    b = n * means.var(ddof=1) if m > 1 else 0.0
    if w == 0:
        return 1.0
    var_plus = (n - 1) / n * w + b / n
    return float(math.sqrt(var_plus / w))


@dataclass
class ScalarDiagnostics:
    name: str
    mean: float
    sd: float
    mcse: float
    ess: float
    rhat: float


def diagnostics(draws: PosteriorDraws) -> list[ScalarDiagnostics]:
    """Per-scalar posterior mean, sd, MC standard error, ESS, split R-hat."""
    if len(draws) < 10:
        raise TooFewDraws(f"need >= 10 draws, got {len(draws)}")
    names, X = scalar_matrix(draws)
    chain_ids = np.unique(draws.chain)
    out = []
    for j, name in enumerate(names):
        col = X[:, j]
        per_chain = [col[draws.chain == c] for c in chain_ids]
        ess = float(min(len(col), sum(ess_geyer(c) for c in per_chain)))
        sd = float(col.std())
        mcse = sd / math.sqrt(ess) if ess > 0 else 0.0
        out.append(
            ScalarDiagnostics(
                name=name,
                mean=float(col.mean()),
                sd=sd,
                mcse=mcse,
                ess=ess,
                rhat=split_rhat(per_chain),
            )
        )
    return out
