"""Model parameters, priors, and the complete-data likelihood.

The process alternates N episodes and non-N (bleeding/spotting) episodes.
Episode durations are exponential with a rate depending on the episode's
value: the latent state 1..k for N episodes, the class S/SB/B for non-N
episodes.  The value of episode j follows a second-order law: categorical
given the values of episodes j-1 and j-2 (the two most recent values, one
per phase); episodes 1 and 2 draw from initial distributions, and the phase
of episode 1 is Bernoulli.

Array index conventions (0-based throughout the arrays):
  treatments     tr = 0..2        (public codes 1..3)
  latent states  l = 0..k-1       (public labels 1..k, state 1 nearly absorbing)
  classes        m = 0..2         in the order S, SB, B (public codes 1..3)
  p_to_n[tr, prev_class, prevprev_state, new_state]     rows over states
  p_to_nonn[tr, prev_state, prevprev_class, new_class]  rows over classes
"""

from __future__ import annotations

import json
import math
from dataclasses import dataclass, replace
from pathlib import Path

import numpy as np

from .diary import EpisodeSequence, Phase
from .errors import (
    ModelError,
    NonPositiveBeta,
    NonPositiveDuration,
    UnassignedLatent,
    ZeroProbabilityTransition,
)

FIXED_N1_RATE = 1e-5
SIMPLEX_TOL = 1e-12
N_CLASSES = 3


@dataclass(frozen=True)
class SharingConfig:
    """Which intensity groups are pooled across the three treatment arms."""

    share_beta_n_across_treatments: bool = True
    share_beta_nonn_across_treatments: bool = False

    @property
    def n_groups_n(self) -> int:
        return 1 if self.share_beta_n_across_treatments else 3

    @property
    def n_groups_nonn(self) -> int:
        return 1 if self.share_beta_nonn_across_treatments else 3

    def group_of_tr_n(self, tr0: int) -> int:
        return 0 if self.share_beta_n_across_treatments else tr0

    def group_of_tr_nonn(self, tr0: int) -> int:
        return 0 if self.share_beta_nonn_across_treatments else tr0


@dataclass(frozen=True)
class PriorConfig:
    gamma_shape: float = 0.1
    gamma_rate: float = 0.1
    dirichlet_concentration: float = 1.0

    def __post_init__(self):
        if min(self.gamma_shape, self.gamma_rate, self.dirichlet_concentration) <= 0:
            raise ModelError("prior hyperparameters must be positive")


def _readonly(a) -> np.ndarray:
    out = np.array(a, dtype=np.float64)
    out.setflags(write=False)
    return out


@dataclass(frozen=True, eq=False)
class ModelParams:
    """Full parameter set; immutable value object.

    ``beta_n`` has one row per sharing group (1 row if pooled across arms,
    else 3); likewise ``beta_nonn``.  All other tensors are per treatment.
    """

    k: int
    sharing: SharingConfig
    beta_n: np.ndarray  # (groups_n, k)
    beta_nonn: np.ndarray  # (groups_nonn, 3)
    p_to_n: np.ndarray  # (3, 3, k, k)
    p_to_nonn: np.ndarray  # (3, k, 3, 3)
    p0_n: np.ndarray  # (3, k)
    p0_nonn: np.ndarray  # (3, 3)
    p00: np.ndarray  # (3,)

    def __post_init__(self):
        for name in ("beta_n", "beta_nonn", "p_to_n", "p_to_nonn", "p0_n", "p0_nonn", "p00"):
            object.__setattr__(self, name, _readonly(getattr(self, name)))

    def beta_n_by_tr(self) -> np.ndarray:
        """Expand the per-group N intensities to one row per treatment."""
        if self.sharing.share_beta_n_across_treatments:
            return np.repeat(self.beta_n, 3, axis=0)
        return self.beta_n

    def beta_nonn_by_tr(self) -> np.ndarray:
        if self.sharing.share_beta_nonn_across_treatments:
            return np.repeat(self.beta_nonn, 3, axis=0)
        return self.beta_nonn

    def with_arrays(self, **kwargs) -> "ModelParams":
        return replace(self, **kwargs)


@dataclass(frozen=True, eq=False)
class ReducedParams:
    """Summary-level parameters: initial laws, intensities, and per-arm
    same-phase one-return ("two-step") transition matrices.

    Rows are renormalized exactly on construction; inputs may be rounded
    published values, accepted if each row sums to 1 within ``row_tol``.
    """

    k: int
    beta_n: np.ndarray  # (k,) shared across arms
    beta_nonn: np.ndarray  # (3, 3) per arm
    m_n: np.ndarray  # (3, k, k) per arm
    m_nonn: np.ndarray  # (3, 3, 3) per arm
    p0_n: np.ndarray  # (3, k)
    p0_nonn: np.ndarray  # (3, 3)
    p00: np.ndarray  # (3,)
    row_tol: float = 0.02

    def __post_init__(self):
        for name in ("m_n", "m_nonn", "p0_n", "p0_nonn"):
            raw = np.array(getattr(self, name), dtype=np.float64)
            sums = raw.sum(axis=-1)
            if np.any(np.abs(sums - 1.0) > self.row_tol):
                raise ModelError(f"{name}: row sums outside 1 +/- {self.row_tol}")
            object.__setattr__(self, name, _readonly(raw / sums[..., None]))
        object.__setattr__(self, "beta_n", _readonly(self.beta_n))
        object.__setattr__(self, "beta_nonn", _readonly(self.beta_nonn))
        object.__setattr__(self, "p00", _readonly(self.p00))


@dataclass(frozen=True)
class ValidationReport:
    violations: tuple[str, ...]

    @property
    def ok(self) -> bool:
        return not self.violations

    def __str__(self) -> str:
        return "ok" if self.ok else "\n".join(self.violations)


def _check_simplex(out, name, arr):
    sums = np.asarray(arr).sum(axis=-1)
    bad = np.argwhere(np.abs(sums - 1.0) > SIMPLEX_TOL)
    for idx in bad:
        key = ",".join(str(i) for i in idx)
        out.append(f"SimplexViolation: {name}[{key}] sums to {sums[tuple(idx)]!r}")
    if np.any(np.asarray(arr) < 0):
        out.append(f"PositivityViolation: {name} has negative entries")


def _check_beta_n_row(out, name, row):
    if row[0] != FIXED_N1_RATE:
        out.append(f"FixedBetaViolation: {name}[0] = {row[0]!r}, expected {FIXED_N1_RATE}")
    if np.any(np.diff(row) < 0):
        out.append(f"OrderingViolation: {name} not nondecreasing: {row.tolist()}")
    if np.any(row <= 0):
        out.append(f"PositivityViolation: {name} has nonpositive intensities")


def validate_params(params) -> ValidationReport:
    """List every violated structural invariant; empty report means valid."""
    out: list[str] = []
    if isinstance(params, ReducedParams):
        k = params.k
        if params.beta_n.shape != (k,):
            out.append(f"ShapeViolation: beta_n {params.beta_n.shape}")
        else:
            _check_beta_n_row(out, "beta_n", params.beta_n)
        if np.any(params.beta_nonn <= 0):
            out.append("PositivityViolation: beta_nonn")
        for name in ("m_n", "m_nonn", "p0_n", "p0_nonn"):
            _check_simplex(out, name, getattr(params, name))
        if np.any((params.p00 < 0) | (params.p00 > 1)):
            out.append("RangeViolation: p00 outside [0, 1]")
        return ValidationReport(tuple(out))

    k = params.k
    shapes = {
        "beta_n": (params.sharing.n_groups_n, k),
        "beta_nonn": (params.sharing.n_groups_nonn, N_CLASSES),
        "p_to_n": (3, N_CLASSES, k, k),
        "p_to_nonn": (3, k, N_CLASSES, N_CLASSES),
        "p0_n": (3, k),
        "p0_nonn": (3, N_CLASSES),
        "p00": (3,),
    }
    for name, want in shapes.items():
        got = getattr(params, name).shape
        if got != want:
            out.append(f"ShapeViolation: {name} is {got}, expected {want}")
    if out:
        return ValidationReport(tuple(out))
    for g in range(params.beta_n.shape[0]):
        _check_beta_n_row(out, f"beta_n[{g}]", params.beta_n[g])
    if np.any(params.beta_nonn <= 0):
        out.append("PositivityViolation: beta_nonn has nonpositive intensities")
    for name in ("p_to_n", "p_to_nonn", "p0_n", "p0_nonn"):
        _check_simplex(out, name, getattr(params, name))
    if np.any((params.p00 < 0) | (params.p00 > 1)):
        out.append("RangeViolation: p00 outside [0, 1]")
    return ValidationReport(tuple(out))


def duration_loglik(beta: float, x: float, censored: bool) -> float:
    """Exponential duration term: ln(beta) - beta*x, or -beta*x if censored."""
    if not beta > 0:
        raise NonPositiveBeta(f"beta = {beta!r}")
    if not x > 0:
        raise NonPositiveDuration(f"duration = {x!r}")
    if censored:
        return -beta * x
    return math.log(beta) - beta * x


def episode_values(seq: EpisodeSequence, values=None) -> np.ndarray:
    """Resolve per-episode 0-based values (latent state or class index).

    If ``values`` is given it is validated and returned; otherwise values are
    read from the episodes, raising :class:`UnassignedLatent` where an N
    episode has no latent state or a censored non-N class is ambiguous.
    """
    n = len(seq.episodes)
    if values is not None:
        vals = np.asarray(values, dtype=np.int64)
        if vals.shape != (n,):
            raise ModelError(f"values shape {vals.shape}, expected ({n},)")
        if np.any(vals < 0):
            raise UnassignedLatent("negative value slot")
        return vals
    out = np.empty(n, dtype=np.int64)
    for j, ep in enumerate(seq.episodes):
        if ep.phase is Phase.N:
            if ep.latent_class is None:
                raise UnassignedLatent(f"episode {j + 1}: latent state missing")
            out[j] = ep.latent_class - 1
        elif ep.observed_class is not None:
            out[j] = ep.observed_class.value - 1
        elif ep.candidates is not None and len(ep.candidates) == 1:
            out[j] = next(iter(ep.candidates)).value - 1
        else:
            raise UnassignedLatent(f"episode {j + 1}: censored class unassigned")
    return out


def _log_or_raise(p: float, what: str) -> float:
    if p <= 0.0:
        raise ZeroProbabilityTransition(what)
    return math.log(p)


def sequence_loglik_complete(params: ModelParams, seq: EpisodeSequence, values=None) -> float:
    """Complete-data log likelihood of one subject's episode sequence."""
    vals = episode_values(seq, values)
    tr0 = seq.treatment - 1
    beta_n = params.beta_n_by_tr()[tr0]
    beta_nonn = params.beta_nonn_by_tr()[tr0]
    eps = seq.episodes

    first_n = eps[0].phase is Phase.N
    p_start = params.p00[tr0] if first_n else 1.0 - params.p00[tr0]
    total = _log_or_raise(p_start, f"phase start, tr={seq.treatment}")

    for j, ep in enumerate(eps):
        v = int(vals[j])
        is_n = ep.phase is Phase.N
        dim = params.k if is_n else N_CLASSES
        if v >= dim:
            raise ModelError(f"episode {j + 1}: value {v} out of range")
        if j < 2:
            p = (params.p0_n if is_n else params.p0_nonn)[tr0, v]
        elif is_n:
            p = params.p_to_n[tr0, vals[j - 1], vals[j - 2], v]
        else:
            p = params.p_to_nonn[tr0, vals[j - 1], vals[j - 2], v]
        total += _log_or_raise(float(p), f"episode {j + 1} value term")
        beta = float((beta_n if is_n else beta_nonn)[v])
        total += duration_loglik(beta, ep.duration_days, ep.censored)
    return total


def _gamma_logpdf(x: float, shape: float, rate: float) -> float:
    return shape * math.log(rate) - math.lgamma(shape) + (shape - 1.0) * math.log(x) - rate * x


def prior_logpdf(params: ModelParams, prior: PriorConfig = PriorConfig()) -> float:
    """Log prior density up to the ordered-region truncation constant.

    Free intensities carry Gamma(shape, rate) terms; the ordered N-phase
    rates contribute an indicator (-inf when violated); flat Dirichlet rows
    contribute their constant log density and the uniform phase probability
    contributes zero.
    """
    total = 0.0
    for g in range(params.beta_n.shape[0]):
        row = params.beta_n[g]
        if np.any(np.diff(row) < 0) or row[0] != FIXED_N1_RATE or np.any(row <= 0):
            return float("-inf")
        for l in range(1, params.k):
            total += _gamma_logpdf(float(row[l]), prior.gamma_shape, prior.gamma_rate)
    if np.any(params.beta_nonn <= 0):
        return float("-inf")
    for g in range(params.beta_nonn.shape[0]):
        for m in range(N_CLASSES):
            total += _gamma_logpdf(
                float(params.beta_nonn[g, m]), prior.gamma_shape, prior.gamma_rate
            )
    # flat Dirichlet(1,...,1) over a d-simplex has constant density (d-1)!
    n_rows_k = 3 * N_CLASSES * params.k + 3
    n_rows_3 = 3 * params.k * N_CLASSES + 3
    total += n_rows_k * math.lgamma(params.k) + n_rows_3 * math.lgamma(N_CLASSES)
    return total


def _fallback_beta_row(k: int, prior: PriorConfig, rng) -> np.ndarray:
    draws = rng.gamma(prior.gamma_shape, 1.0 / prior.gamma_rate, size=k - 1)
    return np.maximum(np.sort(draws), FIXED_N1_RATE * (1 + 1e-3))


def _spread_ties(row: np.ndarray) -> np.ndarray:
    """Nudge equal neighbours apart so first truncated updates have room."""
    out = row.copy()
    for l in range(1, len(out)):
        out[l] = max(out[l], out[l - 1] * (1 + 1e-3))
    return out


def init_params(
    dataset: list[EpisodeSequence],
    prior: PriorConfig,
    k: int,
    sharing: SharingConfig,
    rng: np.random.Generator,
) -> ModelParams:
    """Deterministic-ish chain start: intensities from duration quantile
    bins (method of moments per bin), uniform transition rows, empirical
    initial phase fractions.  Phases with no data fall back to prior draws.
    """
    n_durs: list[list[float]] = [[] for _ in range(3)]
    nonn_n = np.zeros((3, N_CLASSES))
    nonn_t = np.zeros((3, N_CLASSES))
    starts_n = np.zeros(3)
    starts_any = np.zeros(3)
    for seq in dataset:
        tr0 = seq.treatment - 1
        starts_any[tr0] += 1
        if seq.episodes[0].phase is Phase.N:
            starts_n[tr0] += 1
        for ep in seq.episodes:
            if ep.phase is Phase.N:
                n_durs[tr0].append(ep.duration_days)
            elif ep.observed_class is not None:
                m = ep.observed_class.value - 1
                nonn_n[tr0, m] += 1
                nonn_t[tr0, m] += ep.duration_days

    def beta_row_from_durations(durs: list[float]) -> np.ndarray:
        if not durs:
            return _fallback_beta_row(k, prior, rng)
        by_length = np.sort(np.asarray(durs))[::-1]  # longest first -> smallest rate
        bins = np.array_split(by_length, k)
        rates = np.array(
            [1.0 / b.mean() if len(b) else prior.gamma_rate / prior.gamma_shape for b in bins]
        )
        rates = np.maximum(np.sort(rates), FIXED_N1_RATE * (1 + 1e-3))
        return _spread_ties(rates)

    groups_n = sharing.n_groups_n
    beta_n = np.empty((groups_n, k))
    for g in range(groups_n):
        durs = [d for tr0 in range(3) for d in n_durs[tr0]] if groups_n == 1 else n_durs[g]
        row = beta_row_from_durations(durs)
        beta_n[g, 0] = FIXED_N1_RATE
        beta_n[g, 1:] = row[1:] if k > 1 else row[:0]

    groups_b = sharing.n_groups_nonn
    beta_nonn = np.empty((groups_b, N_CLASSES))
    for g in range(groups_b):
        if groups_b == 1:
            n_g, t_g = nonn_n.sum(axis=0), nonn_t.sum(axis=0)
        else:
            n_g, t_g = nonn_n[g], nonn_t[g]
        for m in range(N_CLASSES):
            if n_g[m] > 0:
                beta_nonn[g, m] = n_g[m] / t_g[m]
            else:
                beta_nonn[g, m] = rng.gamma(prior.gamma_shape, 1.0 / prior.gamma_rate)

    p00 = np.where(starts_any > 0, starts_n / np.maximum(starts_any, 1), rng.random(3))
    return ModelParams(
        k=k,
        sharing=sharing,
        beta_n=beta_n,
        beta_nonn=beta_nonn,
        p_to_n=np.full((3, N_CLASSES, k, k), 1.0 / k),
        p_to_nonn=np.full((3, k, N_CLASSES, N_CLASSES), 1.0 / N_CLASSES),
        p0_n=np.full((3, k), 1.0 / k),
        p0_nonn=np.full((3, N_CLASSES), 1.0 / N_CLASSES),
        p00=p00,
    )


# --- JSON interchange ----------------------------------------------------
# Probability vectors are nested lists; class order is S, SB, B and latent
# states run 1..k.  Full parameter files carry the transition tensors; files
# with "M_N"/"M_nonN" keys are summary-level (reduced) parameter sets.


def sharing_to_dict(sharing: SharingConfig) -> dict:
    return {
        "share_beta_N_across_treatments": sharing.share_beta_n_across_treatments,
        "share_beta_nonN_across_treatments": sharing.share_beta_nonn_across_treatments,
    }


def sharing_from_dict(d: dict) -> SharingConfig:
    return SharingConfig(
        share_beta_n_across_treatments=bool(d["share_beta_N_across_treatments"]),
        share_beta_nonn_across_treatments=bool(d["share_beta_nonN_across_treatments"]),
    )


def params_to_dict(params: ModelParams) -> dict:
    return {
        "k": params.k,
        "sharing": sharing_to_dict(params.sharing),
        "beta_N": params.beta_n.tolist(),
        "beta_nonN": params.beta_nonn.tolist(),
        "P_toN": params.p_to_n.tolist(),
        "P_toNonN": params.p_to_nonn.tolist(),
        "P0_N": params.p0_n.tolist(),
        "P0_nonN": params.p0_nonn.tolist(),
        "P00": params.p00.tolist(),
    }


def params_from_dict(d: dict) -> ModelParams:
    return ModelParams(
        k=int(d["k"]),
        sharing=sharing_from_dict(d["sharing"]),
        beta_n=np.asarray(d["beta_N"], dtype=float),
        beta_nonn=np.asarray(d["beta_nonN"], dtype=float),
        p_to_n=np.asarray(d["P_toN"], dtype=float),
        p_to_nonn=np.asarray(d["P_toNonN"], dtype=float),
        p0_n=np.asarray(d["P0_N"], dtype=float),
        p0_nonn=np.asarray(d["P0_nonN"], dtype=float),
        p00=np.asarray(d["P00"], dtype=float),
    )


def reduced_to_dict(params: ReducedParams) -> dict:
    return {
        "k": params.k,
        "beta_N": params.beta_n.tolist(),
        "beta_nonN": params.beta_nonn.tolist(),
        "M_N": params.m_n.tolist(),
        "M_nonN": params.m_nonn.tolist(),
        "P0_N": params.p0_n.tolist(),
        "P0_nonN": params.p0_nonn.tolist(),
        "P00": params.p00.tolist(),
    }


def reduced_from_dict(d: dict) -> ReducedParams:
    return ReducedParams(
        k=int(d["k"]),
        beta_n=np.asarray(d["beta_N"], dtype=float),
        beta_nonn=np.asarray(d["beta_nonN"], dtype=float),
        m_n=np.asarray(d["M_N"], dtype=float),
        m_nonn=np.asarray(d["M_nonN"], dtype=float),
        p0_n=np.asarray(d["P0_N"], dtype=float),
        p0_nonn=np.asarray(d["P0_nonN"], dtype=float),
        p00=np.asarray(d["P00"], dtype=float),
    )


def save_params(params, path) -> None:
    d = reduced_to_dict(params) if isinstance(params, ReducedParams) else params_to_dict(params)
    Path(path).write_text(json.dumps(d, indent=2, sort_keys=True) + "\n")


def load_params(path):
    d = json.loads(Path(path).read_text())
    if "M_N" in d:
        return reduced_from_dict(d)
    return params_from_dict(d)
