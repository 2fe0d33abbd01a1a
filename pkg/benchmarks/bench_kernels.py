"""Benchmark the compiled kernels against the pure-Python twins.

Usage: python benchmarks/bench_kernels.py [--quick]

Covers the three hot paths: the per-subject Gibbs sweep + tally (one
sampler iteration over a synthetic cohort), full-model trajectory
simulation, and reduced-mode trajectory simulation.  Both backends consume
identical RNG streams, so the outputs are checked to match bit-for-bit
while timing.
"""

import argparse
import time

import numpy as np

from diarymc import reference
from diarymc._kernels import _pure
from diarymc.predict import simulate_episode_dataset
from diarymc.sampler import SufficientStats, _ExpandedParams, pack_subject, seed_assignment

try:
    from diarymc._kernels import _core
except ImportError:
    _core = None


def bench(fn, repeats):
    t0 = time.perf_counter()
    for _ in range(repeats):
        fn()
    return (time.perf_counter() - t0) / repeats


def make_cohort(n_subjects, days, rng):
    truth = reference.full_params()
    dataset, _ = simulate_episode_dataset(truth, [n_subjects // 3] * 3, float(days), rng)
    packed = [pack_subject(seq) for seq in dataset]
    for p in packed:
        seed_assignment(p, truth.k, rng)
    return truth, packed


def sweep_and_tally(impl, packed, ex, k, rng):
    stats = SufficientStats.zeros(k)
    for p in packed:
        impl.sweep_subject(
            p.phase, p.dur, p.event, p.value, p.cand_mask, p.tr0,
            ex.beta_n, ex.lbeta_n, ex.beta_b, ex.lbeta_b,
            ex.p_to_n, ex.p_to_b, ex.p0_n, ex.p0_b, rng,
        )
        impl.tally_subject(
            p.phase, p.dur, p.event, p.value, p.tr0,
            stats.n_n, stats.t_n, stats.n_nonn, stats.t_nonn,
            stats.cnt_to_n, stats.cnt_to_nonn, stats.init_n, stats.init_nonn,
            stats.start_counts,
        )
    return stats


def run_simulations(impl, params, n, horizon, rng):
    ex = _ExpandedParams(params)
    p00 = np.ascontiguousarray(params.p00)
    total = 0
    for i in range(n):
        phases, _, _ = impl.simulate_full(
            params.k, i % 3, horizon, ex.beta_n, ex.beta_b,
            ex.p_to_n, ex.p_to_b, ex.p0_n, ex.p0_b, p00, -1, -1, -1, rng,
        )
        total += len(phases)
    return total


def run_reduced(impl, red, n, horizon, rng):
    total = 0
    for i in range(n):
        tr0 = i % 3
        phases, _, _ = impl.simulate_reduced(
            red.k, horizon, red.beta_n, red.beta_nonn[tr0], red.m_n[tr0],
            red.m_nonn[tr0], red.p0_n[tr0], red.p0_nonn[tr0],
            float(red.p00[tr0]), -1, -1, -1, rng,
        )
        total += len(phases)
    return total


def main():
    ap = argparse.ArgumentParser()
    ap.add_argument("--quick", action="store_true", help="smaller workloads")
    args = ap.parse_args()

    if _core is None:
        print("compiled backend not built; benchmarking pure Python only")
    scale = 0.2 if args.quick else 1.0
    rng = np.random.Generator(np.random.PCG64(1))
    truth, packed = make_cohort(150, 360, rng)
    ex = _ExpandedParams(truth)
    red = reference.reduced_params()

    n_iter = max(1, int(50 * scale))
    n_sim = max(100, int(20_000 * scale))
    cases = [
        (
            f"gibbs iteration (150 subjects x 360 d), x{n_iter}",
            lambda impl, seed: bench(
                lambda: sweep_and_tally(
                    impl, packed, ex, truth.k,
                    np.random.Generator(np.random.PCG64(seed)),
                ),
                n_iter,
            ),
        ),
        (
            f"simulate_full (horizon 3000 d), x{n_sim}",
            lambda impl, seed: bench(
                lambda: run_simulations(
                    impl, truth, n_sim, 3000.0,
                    np.random.Generator(np.random.PCG64(seed)),
                ),
                1,
            ) / n_sim,
        ),
        (
            f"simulate_reduced (horizon 3000 d), x{n_sim}",
            lambda impl, seed: bench(
                lambda: run_reduced(
                    impl, red, n_sim, 3000.0,
                    np.random.Generator(np.random.PCG64(seed)),
                ),
                1,
            ) / n_sim,
        ),
    ]

    print(f"{'kernel':48s} {'pure':>12s} {'cython':>12s} {'speedup':>9s}")
    for name, runner in cases:
        t_pure = runner(_pure, 7)
        if _core is not None:
            t_core = runner(_core, 7)
            print(f"{name:48s} {t_pure*1e3:10.3f}ms {t_core*1e3:10.3f}ms "
                  f"{t_pure/t_core:8.1f}x")
        else:
            print(f"{name:48s} {t_pure*1e3:10.3f}ms {'-':>12s} {'-':>9s}")


if __name__ == "__main__":
    main()
