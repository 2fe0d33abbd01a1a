"""Acceptance criteria, one test per criterion, each printing a PASS line.

Run with: pytest tests/test_acceptance.py -v -s

Criteria 1-3 reproduce the published generic-individual predictions from
the bundled arm estimates.  Reproduction protocol notes: the published
waiting-time summaries are matched by a quarter-year (90-day) bleeding-free
gap rule, while the published occupancy proportions are matched by the
half-year (180-day) rule with the clock capped at the one-year prediction
period; the documented package default stays at 180 days.
"""

import math
import time

import numpy as np
import pytest

from diarymc import reference
from diarymc.diary import DiaryDataset, DiarySeries, Phase, extract_episodes, parse_dataset, write_dataset
from diarymc.model import (
    FIXED_N1_RATE,
    PriorConfig,
    SharingConfig,
    save_params,
    load_params,
)
from diarymc.predict import (
    AmenorrheaSpec,
    occupancy_time_totals,
    prob_N_at_times,
    simulate_trajectories,
    time_to_cumulative_amenorrhea,
    simulate_episode_dataset,
)
from diarymc.sampler import (
    ChainConfig,
    SufficientStats,
    flatten_params,
    gibbs_run,
    latent_full_conditional,
    scalar_matrix,
    sweep_latents,
    update_intensities,
    update_phase_prob,
    update_transition_probs,
)

from conftest import random_params, random_sequence
from geweke_harness import moment_zscores, prior_chain, successive_conditional_chain
from oracles import enumerate_slot_conditional

ARM_NAMES = ("cc1", "cc2", "sc")
PUBLISHED_MEDIANS = {"cc1": 99.8, "cc2": 75.1, "sc": 327.7}
PUBLISHED_OCCUPANCY = {
    "cc1": (0.00, 0.48, 0.21, 0.13, 0.11, 0.06, 0.01),
    "cc2": (0.00, 0.47, 0.20, 0.15, 0.11, 0.05, 0.02),
    "sc": (0.00, 0.23, 0.56, 0.07, 0.03, 0.04, 0.01),
}

N_SIMS_T5 = 100_000
HORIZON_T5 = 3000.0
GAP_RULE_WAITING = AmenorrheaSpec(window_days=90.0)
GAP_RULE_OCCUPANCY = AmenorrheaSpec(window_days=180.0)
PREDICTION_PERIOD_CAP = 365.0


@pytest.fixture(scope="module")
def t5_run():
    """One shared simulation per arm for criteria 1 and 2."""
    red = reference.reduced_params()
    rng = np.random.Generator(np.random.PCG64(51))
    out = {}
    t0 = time.time()
    for tr, name in enumerate(ARM_NAMES, start=1):
        medians_sample = []
        occ_totals = np.zeros(7)
        done = 0
        while done < N_SIMS_T5:
            batch = min(20_000, N_SIMS_T5 - done)
            trajs = simulate_trajectories(red, tr, batch, HORIZON_T5, rng)
            medians_sample.extend(
                time_to_cumulative_amenorrhea(t, GAP_RULE_WAITING) for t in trajs
            )
            occ_totals += occupancy_time_totals(
                trajs, k=4, until="amenorrhea", spec=GAP_RULE_OCCUPANCY,
                clock_cap_days=PREDICTION_PERIOD_CAP,
            )
            done += batch
        times = np.asarray(medians_sample)
        out[name] = {
            "median": float(np.quantile(times, 0.5, method="inverted_cdf")),
            "not_reached": float(np.mean(~np.isfinite(times))),
            "occupancy": occ_totals / occ_totals.sum(),
        }
    out["elapsed"] = time.time() - t0
    return out


def test_criterion_1_waiting_time_medians(t5_run):
    meds = {name: t5_run[name]["median"] for name in ARM_NAMES}
    for name in ARM_NAMES:
        ref = PUBLISHED_MEDIANS[name]
        assert 0.75 * ref <= meds[name] <= 1.25 * ref, (name, meds[name], ref)
    assert meds["sc"] > 2 * meds["cc2"]  # sc is far slowest
    assert meds["cc1"] > meds["cc2"]
    print(
        f"PASS criterion 1: amenorrhea medians within +/-25% "
        f"(cc1 {meds['cc1']:.1f}/{PUBLISHED_MEDIANS['cc1']}, "
        f"cc2 {meds['cc2']:.1f}/{PUBLISHED_MEDIANS['cc2']}, "
        f"sc {meds['sc']:.1f}/{PUBLISHED_MEDIANS['sc']}); "
        f"ordering sc >> cc2, cc1 > cc2; elapsed {t5_run['elapsed']:.1f}s"
    )


def test_criterion_2_occupancy(t5_run):
    worst = 0.0
    for name in ARM_NAMES:
        dev = np.abs(t5_run[name]["occupancy"] - np.array(PUBLISHED_OCCUPANCY[name]))
        worst = max(worst, float(dev.max()))
        assert dev.max() < 0.10, (name, t5_run[name]["occupancy"])
    print(f"PASS criterion 2: occupancy within +/-0.10 per entry (worst dev {worst:.3f})")


def test_criterion_3_prob_n_trends():
    red = reference.reduced_params()
    rng = np.random.Generator(np.random.PCG64(52))
    t0 = time.time()
    deltas = {}
    for tr, name in enumerate(ARM_NAMES, start=1):
        p30, p360 = prob_N_at_times(red, tr, [30.0, 360.0], 100_000, rng)
        deltas[name] = p360 - p30
    assert deltas["cc1"] > 0.1
    assert deltas["cc2"] > 0.1
    assert abs(deltas["sc"]) < 0.1
    print(
        f"PASS criterion 3: P(N) trend cc1 +{deltas['cc1']:.3f}, "
        f"cc2 +{deltas['cc2']:.3f}, sc {deltas['sc']:+.3f}; "
        f"elapsed {time.time()-t0:.1f}s"
    )


def test_criterion_4_conjugacy_oracles():
    rng = np.random.Generator(np.random.PCG64(53))
    t0 = time.time()

    # Gamma(0.1 + n, 0.1 + T): 9 cells per call, n=5, T=10
    stats = SufficientStats.zeros(2)
    stats.n_nonn[:, :] = 5.0
    stats.t_nonn[:, :] = 10.0
    cur = np.array([[FIXED_N1_RATE, 0.5]])
    gam = np.concatenate([
        update_intensities(stats, PriorConfig(), SharingConfig(True, False), cur, rng)
        .beta_nonn.ravel()
        for _ in range(12_000)
    ])
    se = gam.std() / math.sqrt(len(gam))
    assert abs(gam.mean() - 5.1 / 10.1) < 4 * se

    # Dirichlet(1 + counts), counts (2, 0, 1) in every row of one tensor
    stats = SufficientStats.zeros(2)
    stats.cnt_to_nonn[:, :, :] = [2.0, 0.0, 1.0]
    rows = np.concatenate([
        update_transition_probs(stats, PriorConfig(), rng)[1].reshape(-1, 3)
        for _ in range(6_000)
    ])
    se = rows.std(axis=0) / math.sqrt(len(rows))
    assert np.all(np.abs(rows.mean(axis=0) - [3 / 6, 1 / 6, 2 / 6]) < 4 * se)

    # Beta(1 + a, 1 + b), a=49, b=1
    stats = SufficientStats.zeros(2)
    stats.start_counts[:, 1] = 49.0
    stats.start_counts[:, 0] = 1.0
    bet = np.concatenate([update_phase_prob(stats, rng) for _ in range(34_000)])
    se = bet.std() / math.sqrt(len(bet))
    assert abs(bet.mean() - 50.0 / 52.0) < 4 * se
    print(
        f"PASS criterion 4: conjugate update means within 4 MCSE at >=1e5 draws "
        f"(elapsed {time.time()-t0:.1f}s)"
    )


def test_criterion_5_latent_conditional_exactness():
    rng = np.random.Generator(np.random.PCG64(54))
    t0 = time.time()
    worst = 0.0
    checked = 0
    for _ in range(200):
        k = int(rng.integers(2, 4))
        params = random_params(rng, k=k)
        seq, values = random_sequence(rng, k=k, n_episodes=int(rng.integers(1, 7)))
        phases = [1 if ep.phase is Phase.N else 0 for ep in seq.episodes]
        durs = [ep.duration_days for ep in seq.episodes]
        cens = [ep.censored for ep in seq.episodes]
        for j, ep in enumerate(seq.episodes):
            if ep.phase is Phase.N:
                cands = list(range(k))
            elif ep.censored and ep.candidates and len(ep.candidates) >= 2:
                cands = sorted(c.value - 1 for c in ep.candidates)
            else:
                continue
            got = latent_full_conditional(j, seq, values, params)
            want = enumerate_slot_conditional(
                j, seq.treatment - 1, phases, durs, cens, list(values), cands,
                k, params.beta_n_by_tr(), params.beta_nonn_by_tr(),
                params.p_to_n, params.p_to_nonn, params.p0_n, params.p0_nonn,
                params.p00,
            )
            worst = max(worst, 0.5 * float(np.abs(got - want).sum()))
            checked += 1
    assert worst < 1e-10
    print(
        f"PASS criterion 5: {checked} conditionals match enumeration, "
        f"worst TV {worst:.2e} (elapsed {time.time()-t0:.1f}s)"
    )


def test_criterion_6_geweke():
    t0 = time.time()
    names, Xp = prior_chain(20_000, seed=101)
    _, Xc = successive_conditional_chain(6_000, seed=202)
    z = moment_zscores(Xp, Xc)
    worst = float(z.max())
    assert worst < 4.0, names[int(z.max(axis=0).argmax())]
    print(
        f"PASS criterion 6: Geweke moments agree, max |z| = {worst:.2f} over "
        f"{z.size} statistics (elapsed {time.time()-t0:.1f}s)"
    )


def test_criterion_7_parameter_recovery():
    t0 = time.time()
    # ground truth seeded from the bundled estimates; exact zeros lifted to
    # 0.01 so every free scalar is coverable by an equal-tailed interval
    red = reference.reduced_params()
    m_n = np.where(red.m_n < 0.005, 0.01, red.m_n)
    m_nonn = np.where(red.m_nonn < 0.005, 0.01, red.m_nonn)
    m_n = m_n / m_n.sum(axis=-1, keepdims=True)
    m_nonn = m_nonn / m_nonn.sum(axis=-1, keepdims=True)
    k = 4
    p_to_n = np.empty((3, 3, k, k))
    p_to_nonn = np.empty((3, k, 3, 3))
    for tr0 in range(3):
        p_to_n[tr0, :, :, :] = m_n[tr0][None]
        p_to_nonn[tr0, :, :, :] = m_nonn[tr0][None]
    truth = reference.full_params().with_arrays(p_to_n=p_to_n, p_to_nonn=p_to_nonn)

    rng = np.random.Generator(np.random.PCG64(55))
    dataset, _ = simulate_episode_dataset(truth, [50, 50, 50], 360.0, rng)
    config = ChainConfig()  # library defaults
    draws = gibbs_run(dataset, config)

    names, X = scalar_matrix(draws)
    truth_flat = flatten_params(truth)
    lo = np.quantile(X, 0.025, axis=0)
    hi = np.quantile(X, 0.975, axis=0)
    covered = [
        lo[j] <= truth_flat[name] <= hi[j] for j, name in enumerate(names)
    ]
    frac = float(np.mean(covered))
    assert frac >= 0.90, frac
    print(
        f"PASS criterion 7: {frac:.1%} of {len(names)} free scalars covered by "
        f"95% intervals (elapsed {time.time()-t0:.0f}s, "
        f"{draws.truncation_failures} truncation fallbacks)"
    )


def test_criterion_8_invariant_suite(tmp_path):
    rng = np.random.Generator(np.random.PCG64(56))
    t0 = time.time()

    # ordering + pinned first rate after 1000 randomized intensity updates
    for _ in range(1000):
        k = int(rng.integers(2, 6))
        stats = SufficientStats.zeros(k)
        stats.n_n[:, :] = rng.integers(0, 60, size=(3, k))
        stats.t_n[:, :] = rng.gamma(2.0, 40.0, size=(3, k))
        cur = np.sort(rng.gamma(1.0, 0.1, size=(1, k)), axis=1) + FIXED_N1_RATE
        cur[0, 0] = FIXED_N1_RATE
        row = update_intensities(
            stats, PriorConfig(), SharingConfig(True, False), cur, rng
        ).beta_n[0]
        assert row[0] == FIXED_N1_RATE and np.all(np.diff(row) >= 0)

    # simplex rows from 1000+ randomized Dirichlet updates
    rows_checked = 0
    while rows_checked < 1000:
        stats = SufficientStats.zeros(3)
        stats.cnt_to_n[:] = rng.integers(0, 30, size=stats.cnt_to_n.shape)
        p_to_n, p_to_nonn = update_transition_probs(stats, PriorConfig(), rng)
        assert np.abs(p_to_n.sum(axis=-1) - 1.0).max() < 1e-12
        assert np.abs(p_to_nonn.sum(axis=-1) - 1.0).max() < 1e-12
        rows_checked += p_to_n.reshape(-1, 3).shape[0]

    # alternation + exact clipping on 1000 random extractions and simulations
    red = reference.reduced_params()
    for i in range(1000):
        n = int(rng.integers(1, 200))
        diary = "".join(rng.choice(list("BSN"), size=n))
        seq = extract_episodes(DiarySeries("s", int(rng.integers(1, 4)), diary))
        assert seq.total_duration == float(n)
        for a, b in zip(seq.episodes, seq.episodes[1:]):
            assert a.phase is not b.phase
        traj = simulate_trajectories(red, 1 + i % 3, 1, 500.0, rng)[0]
        assert abs(traj.durations.sum() - 500.0) < 1e-9
        assert np.all(traj.phases[1:] != traj.phases[:-1])

    # determinism: 1000 paired sweeps under identical seeds
    for case in range(1000):
        k = 2
        params = random_params(rng, k=k)
        seq, values = random_sequence(rng, k=k)
        r1 = np.random.Generator(np.random.PCG64(9000 + case))
        r2 = np.random.Generator(np.random.PCG64(9000 + case))
        a1 = sweep_latents([seq], {seq.subject_id: values.copy()}, params, r1)
        a2 = sweep_latents([seq], {seq.subject_id: values.copy()}, params, r2)
        assert np.array_equal(a1[seq.subject_id], a2[seq.subject_id])

    # round trip: 1000 subjects across both formats, plus params JSON
    written = 0
    trial = 0
    while written < 1000:
        subjects = []
        for i in range(25):
            n = int(rng.integers(1, 80))
            subjects.append(
                DiarySeries(f"s{i}", int(rng.integers(1, 4)),
                            "".join(rng.choice(list("BSN"), size=n)))
            )
        ds = DiaryDataset(subjects=tuple(subjects))
        fmt = "long_csv" if trial % 2 == 0 else "compact_csv"
        path = tmp_path / f"rt{trial}.csv"
        write_dataset(ds, path, fmt)
        assert parse_dataset(path, fmt) == ds
        written += len(subjects)
        trial += 1
    for i in range(100):
        params = random_params(rng, k=int(rng.integers(1, 5)))
        path = tmp_path / f"p{i}.json"
        save_params(params, path)
        back = load_params(path)
        for nm in ("beta_n", "beta_nonn", "p_to_n", "p_to_nonn", "p0_n", "p0_nonn", "p00"):
            assert np.array_equal(getattr(back, nm), getattr(params, nm))

    print(
        f"PASS criterion 8: ordering, simplex, alternation, determinism and "
        f"round-trip invariants hold on >=1000 cases each "
        f"(elapsed {time.time()-t0:.1f}s)"
    )
