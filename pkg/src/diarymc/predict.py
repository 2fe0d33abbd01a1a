"""Forward simulation of the fitted process and predictive summaries.

Simulation runs either from a full parameter set (second-order transition
tensors) or from a summary-level :class:`~diarymc.model.ReducedParams` where
each phase advances by its own one-return matrix.  Summaries cover the
probability of being bleeding-free at given times, the waiting time to
cumulative amenorrhea (a bleeding-free gap longer than the configured
window), state occupancy until that point, residual relapse times, and
subject-conditional continuation given an observed history.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from . import _kernels
from .diary import DiaryDataset, DiarySeries, Episode, EpisodeSequence, NonNClass, Phase
from .errors import (
    ConditioningFailure,
    HorizonTooShort,
    InvalidStart,
)
from .model import ModelParams, N_CLASSES, ReducedParams
from .sampler import PosteriorDraws, _ExpandedParams, pack_subject, seed_assignment

NOT_REACHED = math.inf


@dataclass(frozen=True)
class Trajectory:
    """Piecewise-constant simulated path, clipped exactly at the horizon."""

    phases: np.ndarray  # int8, 1 = N
    values: np.ndarray  # int64, 0-based state or class
    durations: np.ndarray  # float64, final segment clipped
    horizon: float

    def __len__(self) -> int:
        return len(self.phases)

    @property
    def ends(self) -> np.ndarray:
        return np.cumsum(self.durations)

    def segment_at(self, t: float) -> int:
        """Index of the segment covering time ``t`` (segments are [s, e))."""
        i = int(np.searchsorted(self.ends, t, side="right"))
        return min(i, len(self.phases) - 1)


@dataclass(frozen=True)
class TrajectoryStart:
    """Continuation state: an in-progress episode plus chain memory.

    ``value`` is the 0-based value of the in-progress episode.  In full mode
    ``prev_value`` is the value of the episode before it (-1 when the next
    draw must still use the initial law); in reduced mode it seeds the other
    phase's chain instead.
    """

    phase: Phase
    value: int
    prev_value: int = -1


@dataclass(frozen=True)
class AmenorrheaSpec:
    """Cumulative amenorrhea window: a bleeding-free gap must exceed
    ``window_days`` (or reach it when ``inclusive``)."""

    window_days: float = 180.0
    inclusive: bool = False

    def __post_init__(self):
        if not self.window_days > 0:
            raise ValueError("window_days must be positive")

    def qualifies(self, gap: float) -> bool:
        return gap >= self.window_days if self.inclusive else gap > self.window_days


def _check_start(start, k: int):
    ph = 1 if start.phase is Phase.N else 0
    dim = k if ph == 1 else N_CLASSES
    if not 0 <= start.value < dim:
        raise InvalidStart(f"value {start.value} out of range for phase {start.phase}")
    if start.prev_value >= 0:
        other_dim = N_CLASSES if ph == 1 else k
        if start.prev_value >= other_dim:
            raise InvalidStart(f"prev_value {start.prev_value} out of range")
    return ph, start.value, start.prev_value if start.prev_value >= 0 else -1


def simulate_trajectory(
    params,
    tr: int,
    horizon_days: float,
    rng: np.random.Generator,
    start: TrajectoryStart | None = None,
) -> Trajectory:
    """Simulate one trajectory for treatment arm ``tr`` (1..3)."""
    if not horizon_days > 0:
        raise ValueError("horizon_days must be positive")
    if tr not in (1, 2, 3):
        raise ValueError(f"treatment {tr!r}")
    tr0 = tr - 1
    if start is None:
        sp, sv, spr = -1, -1, -1
    else:
        sp, sv, spr = _check_start(start, params.k)

    if isinstance(params, ReducedParams):
        phases, values, durs = _kernels.simulate_reduced(
            params.k, float(horizon_days),
            params.beta_n, params.beta_nonn[tr0],
            params.m_n[tr0], params.m_nonn[tr0],
            params.p0_n[tr0], params.p0_nonn[tr0], float(params.p00[tr0]),
            sp, sv, spr, rng,
        )
    else:
        ex = _ExpandedParams(params)
        phases, values, durs = _kernels.simulate_full(
            params.k, tr0, float(horizon_days),
            ex.beta_n, ex.beta_b, ex.p_to_n, ex.p_to_b, ex.p0_n, ex.p0_b,
            np.ascontiguousarray(params.p00),
            sp, sv, spr, rng,
        )
    return Trajectory(phases=phases, values=values, durations=durs, horizon=float(horizon_days))


def simulate_trajectories(params, tr, n: int, horizon_days, rng, start=None) -> list:
    return [simulate_trajectory(params, tr, horizon_days, rng, start) for _ in range(n)]


def prob_N_at_times(params, tr, time_points, n_sims: int, rng) -> np.ndarray:
    """Monte Carlo probability of being in an N episode at each time."""
    tps = np.asarray(list(time_points), dtype=float)
    if n_sims < 1:
        raise ValueError("n_sims >= 1 required")
    horizon = float(tps.max()) + 1e-6
    hits = np.zeros(len(tps))
    for _ in range(n_sims):
        traj = simulate_trajectory(params, tr, horizon, rng)
        ends = traj.ends
        idx = np.minimum(np.searchsorted(ends, tps, side="right"), len(ends) - 1)
        hits += traj.phases[idx] == 1
    return hits / n_sims


def time_to_cumulative_amenorrhea(traj: Trajectory, spec: AmenorrheaSpec = AmenorrheaSpec()):
    """Start of the first bleeding-free gap longer than the window.

    This equals the end of the last bleeding/spotting episode before the
    gap, or 0.0 when the trajectory opens with a qualifying gap.  Returns
    ``math.inf`` (NOT_REACHED) when no gap within the horizon qualifies.
    """
    if traj.horizon < spec.window_days:
        raise HorizonTooShort(
            f"horizon {traj.horizon} shorter than window {spec.window_days}"
        )
    t = 0.0
    for i in range(len(traj)):
        d = float(traj.durations[i])
        if traj.phases[i] == 1 and spec.qualifies(d):
            return t
        t += d
    return NOT_REACHED


def summarize_times(times) -> dict:
    """Quantiles and mean of waiting times with a NotReached (inf) mass.

    Quantiles are over all values (inf when the quantile falls in the
    censored mass); the mean is over reached times only.
    """
    arr = np.asarray(list(times), dtype=float)
    finite = arr[np.isfinite(arr)]
    # order statistics: no interpolation, so a censored (inf) mass stays inf
    q25, med, q75 = np.quantile(arr, [0.25, 0.5, 0.75], method="inverted_cdf")
    return {
        "median": float(med),
        "mean": float(finite.mean()) if len(finite) else math.inf,
        "q25": float(q25),
        "q75": float(q75),
        "not_reached_frac": float(np.mean(~np.isfinite(arr))),
    }


def occupancy_time_totals(
    trajs, k: int, until: str = "amenorrhea",
    spec: AmenorrheaSpec = AmenorrheaSpec(), clock_cap_days=None,
) -> np.ndarray:
    """Pooled time per state (N1..Nk then S, SB, B) across trajectories.

    With ``until="amenorrhea"`` each trajectory's clock stops at its
    amenorrhea waiting time (NotReached trajectories use the full horizon);
    ``clock_cap_days`` additionally caps every clock.
    """
    if until not in ("amenorrhea", "horizon"):
        raise ValueError(f"until {until!r}")
    totals = np.zeros(k + N_CLASSES)
    for traj in trajs:
        if until == "amenorrhea":
            clock = time_to_cumulative_amenorrhea(traj, spec)
            if math.isinf(clock):
                clock = traj.horizon
        else:
            clock = traj.horizon
        if clock_cap_days is not None:
            clock = min(clock, clock_cap_days)
        if clock <= 0:
            continue
        dur = traj.durations
        starts = np.concatenate(([0.0], np.cumsum(dur)[:-1]))
        clipped = np.minimum(dur, np.maximum(clock - starts, 0.0))
        idx = np.where(traj.phases == 1, traj.values, k + traj.values)
        totals += np.bincount(idx, weights=clipped, minlength=k + N_CLASSES)
    return totals


def occupancy_proportions(
    trajs, k: int, until: str = "amenorrhea",
    spec: AmenorrheaSpec = AmenorrheaSpec(), clock_cap_days=None,
) -> np.ndarray:
    """Time-weighted state proportions over N1..Nk, S, SB, B (sums to 1)."""
    trajs = list(trajs)
    if not trajs:
        raise ValueError("no trajectories")
    totals = occupancy_time_totals(trajs, k, until, spec, clock_cap_days)
    s = totals.sum()
    if s <= 0:
        raise ValueError("no occupancy time before every clock stop")
    return totals / s


def residual_relapse_time(
    params, tr, t0: float, n_sims: int, rng,
    horizon_days=None, max_attempts_per_sim: int = 100,
) -> dict:
    """Distribution of the time from ``t0`` to the next bleeding/spotting
    episode, conditioned on being bleeding-free at ``t0``.

    Trajectories not in an N episode at ``t0`` are redrawn; censored
    residuals (episode still running at the horizon) count as NotReached.
    """
    if t0 < 0:
        raise ValueError("t0 must be nonnegative")
    horizon = float(horizon_days) if horizon_days is not None else t0 + 3000.0
    if horizon <= t0:
        raise HorizonTooShort(f"horizon {horizon} must exceed t0 {t0}")
    residuals = []
    attempts = 0
    budget = max_attempts_per_sim * n_sims
    while len(residuals) < n_sims:
        if attempts >= budget:
            raise ConditioningFailure(
                f"could not find {n_sims} trajectories in N at t0={t0} "
                f"within {budget} attempts"
            )
        attempts += 1
        traj = simulate_trajectory(params, tr, horizon, rng)
        i = traj.segment_at(t0)
        if traj.phases[i] != 1:
            continue
        if i == len(traj) - 1:
            residuals.append(NOT_REACHED)
        else:
            residuals.append(float(traj.ends[i]) - t0)
    return summarize_times(residuals)


@dataclass(frozen=True)
class ConditionedState:
    """Terminal state of a subject after latent conditioning: the final
    (in-progress) episode's phase and value plus the chain memory pair."""

    phase: Phase
    value: int
    prev_value: int
    params: ModelParams

    def as_start(self) -> TrajectoryStart:
        return TrajectoryStart(phase=self.phase, value=self.value, prev_value=self.prev_value)


def _as_params_list(draws):
    if isinstance(draws, PosteriorDraws):
        return list(draws.params)
    if isinstance(draws, (ModelParams, ReducedParams)):
        return [draws]
    return list(draws)


def condition_subject_latents(
    draws, subject: EpisodeSequence, sweeps: int, rng
) -> list[ConditionedState]:
    """Gibbs-condition the subject's latent slots under each parameter draw
    (parameters held fixed) and return the terminal continuation state."""
    if not subject.episodes[-1].censored:
        raise InvalidStart("subject's final episode must be censored")
    out = []
    for params in _as_params_list(draws):
        if isinstance(params, ReducedParams):
            raise ValueError("subject conditioning needs full parameters")
        packed = pack_subject(subject)
        seed_assignment(packed, params.k, rng)
        ex = _ExpandedParams(params)
        for _ in range(sweeps):
            _kernels.sweep_subject(
                packed.phase, packed.dur, packed.event, packed.value, packed.cand_mask,
                packed.tr0, ex.beta_n, ex.lbeta_n, ex.beta_b, ex.lbeta_b,
                ex.p_to_n, ex.p_to_b, ex.p0_n, ex.p0_b, rng,
            )
        last = len(packed.phase) - 1
        out.append(
            ConditionedState(
                phase=Phase.N if packed.phase[last] == 1 else Phase.NON_N,
                value=int(packed.value[last]),
                prev_value=int(packed.value[last - 1]) if last >= 1 else -1,
                params=params,
            )
        )
    return out


@dataclass(frozen=True)
class SubjectPrediction:
    time_points: np.ndarray
    prob_n: np.ndarray
    amenorrhea: dict


def predict_subject_future(
    draws, subject: EpisodeSequence, horizon_days: float, time_points,
    n_sims_per_draw: int, rng, sweeps: int = 50,
    spec: AmenorrheaSpec = AmenorrheaSpec(),
) -> SubjectPrediction:
    """Continue the subject's process past the end of observation.

    Times are offsets from the end of the observed history.  For each
    parameter draw the subject's latents are conditioned first, then the
    in-progress episode is continued with a fresh residual duration
    (memorylessness) and simulated forward; results mix over draws.
    """
    tps = np.asarray(list(time_points), dtype=float)
    if horizon_days < max(tps.max(), spec.window_days):
        raise HorizonTooShort(
            f"horizon {horizon_days} must cover time points and the window"
        )
    states = condition_subject_latents(draws, subject, sweeps, rng)
    hits = np.zeros(len(tps))
    amen = []
    for st in states:
        for _ in range(n_sims_per_draw):
            traj = simulate_trajectory(
                st.params, subject.treatment, horizon_days, rng, start=st.as_start()
            )
            ends = traj.ends
            idx = np.minimum(np.searchsorted(ends, tps, side="right"), len(ends) - 1)
            hits += traj.phases[idx] == 1
            amen.append(time_to_cumulative_amenorrhea(traj, spec))
    n_total = len(states) * n_sims_per_draw
    return SubjectPrediction(
        time_points=tps, prob_n=hits / n_total, amenorrhea=summarize_times(amen)
    )


@dataclass(frozen=True)
class TwoStepResult:
    """Same-phase one-return transition estimates with per-row visit counts.

    Rows never visited are NaN and flagged by a zero visit count."""

    m_n: np.ndarray  # (3, k, k)
    m_nonn: np.ndarray  # (3, 3, 3)
    visits_n: np.ndarray  # (3, k)
    visits_nonn: np.ndarray  # (3, 3)


def _pair_counts(traj: Trajectory, k: int):
    cn = np.zeros((k, k))
    cb = np.zeros((N_CLASSES, N_CLASSES))
    vn = traj.values[traj.phases == 1]
    vb = traj.values[traj.phases == 0]
    if len(vn) >= 2:
        np.add.at(cn, (vn[:-1], vn[1:]), 1.0)
    if len(vb) >= 2:
        np.add.at(cb, (vb[:-1], vb[1:]), 1.0)
    return cn, cb


def two_step_summary(
    draws, n_sims: int, rng, horizon_days: float = 200_000.0
) -> TwoStepResult:
    """Monte Carlo estimate of P(next same-phase value | current value).

    Simulates ``n_sims`` trajectories per arm under each draw, row-normalizes
    the per-draw pair counts, and averages the matrices over draws.  The
    near-absorbing first N state exits only on very long horizons, hence the
    large default."""
    params_list = _as_params_list(draws)
    if not params_list:
        raise ValueError("need at least one draw")
    k = params_list[0].k
    per_draw_n = []
    per_draw_b = []
    visits_n = np.zeros((3, k))
    visits_b = np.zeros((3, N_CLASSES))
    for params in params_list:
        mn = np.full((3, k, k), np.nan)
        mb = np.full((3, N_CLASSES, N_CLASSES), np.nan)
        for tr0 in range(3):
            cn = np.zeros((k, k))
            cb = np.zeros((N_CLASSES, N_CLASSES))
            for _ in range(n_sims):
                traj = simulate_trajectory(params, tr0 + 1, horizon_days, rng)
                a, b = _pair_counts(traj, k)
                cn += a
                cb += b
            rn = cn.sum(axis=1)
            rb = cb.sum(axis=1)
            visits_n[tr0] += rn
            visits_b[tr0] += rb
            mn[tr0][rn > 0] = cn[rn > 0] / rn[rn > 0, None]
            mb[tr0][rb > 0] = cb[rb > 0] / rb[rb > 0, None]
        per_draw_n.append(mn)
        per_draw_b.append(mb)
    import warnings

    with warnings.catch_warnings():
        warnings.simplefilter("ignore", category=RuntimeWarning)
        m_n = np.nanmean(per_draw_n, axis=0)
        m_nonn = np.nanmean(per_draw_b, axis=0)
    return TwoStepResult(m_n=m_n, m_nonn=m_nonn, visits_n=visits_n, visits_nonn=visits_b)


# --- conversion back to observable data -------------------------------------


def trajectory_to_episodes(
    traj: Trajectory, subject_id: str, treatment: int
) -> tuple[EpisodeSequence, np.ndarray]:
    """Complete-data episode sequence (values filled) plus the value array.

    The final episode is censored by the horizon; a censored non-N episode
    keeps its class as a singleton candidate set."""
    eps = []
    n = len(traj)
    for i in range(n):
        last = i == n - 1
        v = int(traj.values[i])
        if traj.phases[i] == 1:
            eps.append(
                Episode(
                    phase=Phase.N,
                    duration_days=float(traj.durations[i]),
                    latent_class=v + 1,
                    censored=last,
                )
            )
        elif last:
            eps.append(
                Episode(
                    phase=Phase.NON_N,
                    duration_days=float(traj.durations[i]),
                    censored=True,
                    candidates=frozenset({NonNClass(v + 1)}),
                )
            )
        else:
            eps.append(
                Episode(
                    phase=Phase.NON_N,
                    duration_days=float(traj.durations[i]),
                    observed_class=NonNClass(v + 1),
                )
            )
    seq = EpisodeSequence(subject_id=subject_id, treatment=treatment, episodes=tuple(eps))
    return seq, traj.values.astype(np.int64)


def erase_for_inference(seq: EpisodeSequence) -> EpisodeSequence:
    """Hide what an observer cannot see: latent states and, for a censored
    final non-N episode, the class (all three classes become candidates)."""
    eps = []
    for ep in seq.episodes:
        if ep.phase is Phase.N:
            eps.append(
                Episode(phase=Phase.N, duration_days=ep.duration_days, censored=ep.censored)
            )
        elif ep.censored:
            eps.append(
                Episode(
                    phase=Phase.NON_N,
                    duration_days=ep.duration_days,
                    censored=True,
                    candidates=frozenset(NonNClass),
                )
            )
        else:
            eps.append(ep)
    return EpisodeSequence(
        subject_id=seq.subject_id, treatment=seq.treatment, episodes=tuple(eps)
    )


def simulate_episode_dataset(
    params, arm_sizes, horizon_days: float, rng
) -> tuple[list[EpisodeSequence], dict]:
    """Episode-level synthetic dataset: (erased sequences, true values)."""
    dataset = []
    truth = {}
    for tr0, size in enumerate(arm_sizes):
        for s in range(size):
            sid = f"tr{tr0 + 1}_s{s + 1:03d}"
            traj = simulate_trajectory(params, tr0 + 1, horizon_days, rng)
            seq, values = trajectory_to_episodes(traj, sid, tr0 + 1)
            dataset.append(erase_for_inference(seq))
            truth[sid] = values
    return dataset, truth


def discretize_to_diary(traj: Trajectory, subject_id: str, treatment: int) -> DiarySeries:
    """Daily diary from a trajectory: each calendar day takes the symbol of
    the segment covering its midpoint; SB segments paint alternating B/S
    days starting with B."""
    n_days = int(round(traj.horizon))
    if n_days < 1:
        raise ValueError("horizon must cover at least one day")
    ends = traj.ends
    starts = np.concatenate(([0.0], ends[:-1]))
    chars = []
    for d in range(n_days):
        mid = d + 0.5
        i = min(int(np.searchsorted(ends, mid, side="right")), len(ends) - 1)
        if traj.phases[i] == 1:
            chars.append("N")
            continue
        cls = NonNClass(int(traj.values[i]) + 1)
        if cls is NonNClass.S:
            chars.append("S")
        elif cls is NonNClass.B:
            chars.append("B")
        else:
            first_day = math.ceil(starts[i] - 0.5)
            chars.append("B" if (d - first_day) % 2 == 0 else "S")
    return DiarySeries(subject_id=subject_id, treatment=treatment, diary="".join(chars))


def simulate_diary_dataset(params, arm_sizes, days: int, rng) -> DiaryDataset:
    """Synthetic daily-diary dataset, one trajectory per subject."""
    subjects = []
    for tr0, size in enumerate(arm_sizes):
        for s in range(size):
            sid = f"tr{tr0 + 1}_s{s + 1:03d}"
            traj = simulate_trajectory(params, tr0 + 1, float(days), rng)
            subjects.append(discretize_to_diary(traj, sid, tr0 + 1))
    return DiaryDataset(subjects=tuple(subjects))
