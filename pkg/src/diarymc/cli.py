"""Command-line front end.

Subcommands: validate, episodes, simulate, fit, predict-generic,
predict-subject, summarize, two-step.  Every command is a pure function of
its input files, flags, and seed; outputs are UTF-8 with LF line endings.
Exit codes: 0 success, 1 input validation error, 2 runtime failure, with a
machine-readable JSON error on stderr.
"""

from __future__ import annotations

import argparse
import csv
import json
import sys
from pathlib import Path

import numpy as np

from . import _kernels
from .diary import extract_episodes, parse_dataset, write_dataset, write_episode_csv
from .errors import (
    DataFormatError,
    EmptyDraws,
    HorizonTooShort,
    InvalidStart,
    ModelError,
    TooFewDraws,
)
from .model import load_params
from .predict import (
    AmenorrheaSpec,
    occupancy_proportions,
    predict_subject_future,
    prob_N_at_times,
    simulate_diary_dataset,
    simulate_trajectories,
    time_to_cumulative_amenorrhea,
    summarize_times,
    two_step_summary,
)
from .sampler import (
    ChainConfig,
    diagnostics,
    gibbs_run,
    load_draws,
    save_draws,
)
from .model import PriorConfig, SharingConfig

DEFAULT_SEED = 1729
CLASS_COLS = ["S", "SB", "B"]

_VALIDATION_ERRORS = (
    DataFormatError,
    ModelError,
    EmptyDraws,
    TooFewDraws,
    HorizonTooShort,
    InvalidStart,
    FileNotFoundError,
    ValueError,
)

# config-file key -> converter; keys mirror flag destinations
_CONFIG_TYPES = {
    "input": str,
    "format": str,
    "out_dir": str,
    "params": str,
    "draws_file": str,
    "subject": str,
    "seed": int,
    "k": int,
    "burnin": int,
    "draws": int,
    "thin": int,
    "chains": int,
    "horizon": float,
    "nsims": int,
    "window": float,
    "times": str,
    "days": int,
    "arm_sizes": str,
    "sweeps": int,
    "max_draws": int,
    "share_beta_n": lambda s: s.lower() in ("1", "true", "yes"),
    "share_beta_nonn": lambda s: s.lower() in ("1", "true", "yes"),
    "store_latents": lambda s: s.lower() in ("1", "true", "yes"),
}


def _parse_times(raw: str) -> list[float]:
    return [float(x) for x in raw.split(",") if x.strip()]


def _parse_arm_sizes(raw: str) -> list[int]:
    sizes = [int(x) for x in raw.split(",") if x.strip()]
    if len(sizes) != 3 or any(s < 0 for s in sizes):
        raise ValueError("--arm-sizes needs three nonnegative integers")
    return sizes


def _rng(seed: int) -> np.random.Generator:
    return np.random.Generator(np.random.PCG64(seed))


def _out_dir(args) -> Path:
    out = Path(args.out_dir)
    out.mkdir(parents=True, exist_ok=True)
    return out


def _write_csv(path: Path, header, rows) -> None:
    with path.open("w", newline="\n") as fh:
        writer = csv.writer(fh, lineterminator="\n")
        writer.writerow(header)
        writer.writerows(rows)


def _write_json(path: Path, obj) -> None:
    path.write_text(json.dumps(obj, indent=2, sort_keys=True) + "\n")


def cmd_validate(args) -> int:
    ds = parse_dataset(args.input, args.format)
    arms = ds.arms
    days = [len(s.diary) for s in ds.subjects]
    print(
        f"ok: {len(ds.subjects)} subjects, arms {arms}, "
        f"days {min(days)}..{max(days)}"
    )
    return 0


def cmd_episodes(args) -> int:
    ds = parse_dataset(args.input, args.format)
    seqs = [extract_episodes(s) for s in ds.subjects]
    out = _out_dir(args) / "episodes.csv"
    write_episode_csv(seqs, out)
    print(f"wrote {out}")
    return 0


def cmd_simulate(args) -> int:
    params = load_params(args.params)
    sizes = _parse_arm_sizes(args.arm_sizes)
    ds = simulate_diary_dataset(params, sizes, args.days, _rng(args.seed))
    out = _out_dir(args) / "diaries.csv"
    write_dataset(ds, out, args.format)
    print(f"wrote {out}")
    return 0


def cmd_fit(args) -> int:
    ds = parse_dataset(args.input, args.format)
    dataset = [extract_episodes(s) for s in ds.subjects]
    config = ChainConfig(
        burn_in=args.burnin,
        draws=args.draws,
        thin=args.thin,
        chains=args.chains,
        seed=args.seed,
        k=args.k,
        sharing=SharingConfig(
            share_beta_n_across_treatments=args.share_beta_n,
            share_beta_nonn_across_treatments=args.share_beta_nonn,
        ),
        prior=PriorConfig(),
        store_latents=args.store_latents,
    )
    draws = gibbs_run(dataset, config)
    out = _out_dir(args)
    latents_path = out / "latents.jsonl" if args.store_latents else None
    save_draws(draws, out / "draws.jsonl", latents_path)
    diag = diagnostics(draws) if len(draws) >= 10 else []
    _write_csv(
        out / "diagnostics.csv",
        ["name", "mean", "sd", "mcse", "ess", "rhat"],
        [[d.name, repr(d.mean), repr(d.sd), repr(d.mcse), repr(d.ess), repr(d.rhat)] for d in diag],
    )
    print(
        f"wrote {out / 'draws.jsonl'} ({len(draws)} draws, backend {draws.backend}, "
        f"{draws.truncation_failures} truncation fallbacks)"
    )
    return 0


def _subsample_draws(draws, max_draws):
    """Evenly spaced subset of stored draws; deterministic."""
    if max_draws is None or len(draws.params) <= max_draws:
        return draws
    idx = np.linspace(0, len(draws.params) - 1, max_draws).round().astype(int)
    from dataclasses import replace

    return replace(
        draws,
        params=[draws.params[i] for i in idx],
        chain=draws.chain[idx],
        iteration=draws.iteration[idx],
        loglik=draws.loglik[idx],
        latents=None,
    )


def _load_any_params(args):
    if getattr(args, "draws_file", None):
        draws = load_draws(args.draws_file)
        return _subsample_draws(draws, getattr(args, "max_draws", None))
    if getattr(args, "params", None):
        return load_params(args.params)
    raise ValueError("need --params or --draws-file")


def cmd_predict_generic(args) -> int:
    params = load_params(args.params)
    times = _parse_times(args.times)
    spec = AmenorrheaSpec(window_days=args.window)
    out = _out_dir(args)
    rng = _rng(args.seed)
    occ_rows = []
    k = params.k
    for tr in (1, 2, 3):
        probs = prob_N_at_times(params, tr, times, args.nsims, rng)
        _write_csv(
            out / f"prob_n_arm{tr}.csv",
            ["t", "prob_N"],
            [[repr(float(t)), repr(float(p))] for t, p in zip(times, probs)],
        )
        trajs = simulate_trajectories(params, tr, args.nsims, args.horizon, rng)
        amen = [time_to_cumulative_amenorrhea(t, spec) for t in trajs]
        _write_json(out / f"amenorrhea_arm{tr}.json", summarize_times(amen))
        occ = occupancy_proportions(trajs, k, "amenorrhea", spec)
        occ_rows.append([tr] + [repr(float(x)) for x in occ])
    _write_csv(
        out / "occupancy.csv",
        ["arm"] + [f"N{l}" for l in range(1, k + 1)] + CLASS_COLS,
        occ_rows,
    )
    print(f"wrote prediction outputs to {out}")
    return 0


def cmd_predict_subject(args) -> int:
    ds = parse_dataset(args.input, args.format)
    match = [s for s in ds.subjects if s.subject_id == args.subject]
    if not match:
        raise ValueError(f"subject {args.subject!r} not in {args.input}")
    seq = extract_episodes(match[0])
    draws = _load_any_params(args)
    times = _parse_times(args.times)
    pred = predict_subject_future(
        draws,
        seq,
        args.horizon,
        times,
        args.nsims,
        _rng(args.seed),
        sweeps=args.sweeps,
        spec=AmenorrheaSpec(window_days=args.window),
    )
    out = _out_dir(args)
    _write_csv(
        out / f"prob_n_subject_{args.subject}.csv",
        ["t", "prob_N"],
        [[repr(float(t)), repr(float(p))] for t, p in zip(pred.time_points, pred.prob_n)],
    )
    _write_json(out / f"amenorrhea_subject_{args.subject}.json", pred.amenorrhea)
    print(f"wrote subject prediction to {out}")
    return 0


def _write_two_step(out: Path, result, k: int) -> None:
    rows = []
    for tr0 in range(3):
        for l in range(k):
            rows.append(
                [tr0 + 1, f"N{l + 1}"]
                + [repr(float(x)) for x in result.m_n[tr0, l]]
                + [int(result.visits_n[tr0, l])]
            )
    _write_csv(
        out / "twostep_n.csv",
        ["arm", "row"] + [f"N{l}" for l in range(1, k + 1)] + ["visits"],
        rows,
    )
    rows = []
    for tr0 in range(3):
        for m in range(3):
            rows.append(
                [tr0 + 1, CLASS_COLS[m]]
                + [repr(float(x)) for x in result.m_nonn[tr0, m]]
                + [int(result.visits_nonn[tr0, m])]
            )
    _write_csv(out / "twostep_nonn.csv", ["arm", "row"] + CLASS_COLS + ["visits"], rows)


def cmd_two_step(args) -> int:
    draws = _load_any_params(args)
    k = draws.params[0].k if hasattr(draws, "params") else draws.k
    result = two_step_summary(draws, args.nsims, _rng(args.seed), args.horizon)
    out = _out_dir(args)
    _write_two_step(out, result, k)
    print(f"wrote two-step tables to {out}")
    return 0


def cmd_summarize(args) -> int:
    draws = load_draws(args.draws_file)
    k = draws.params[0].k
    out = _out_dir(args)

    p00 = np.mean([p.p00 for p in draws.params], axis=0)
    p0_n = np.mean([p.p0_n for p in draws.params], axis=0)
    p0_nonn = np.mean([p.p0_nonn for p in draws.params], axis=0)
    rows = [
        [tr + 1, repr(float(p00[tr]))]
        + [repr(float(x)) for x in p0_n[tr]]
        + [repr(float(x)) for x in p0_nonn[tr]]
        for tr in range(3)
    ]
    _write_csv(
        out / "phase_probs.csv",
        ["arm", "P00"] + [f"N{l}" for l in range(1, k + 1)] + CLASS_COLS,
        rows,
    )

    beta_n = np.mean([p.beta_n for p in draws.params], axis=0)
    beta_nonn = np.mean([p.beta_nonn for p in draws.params], axis=0)
    _write_csv(
        out / "intensities_n.csv",
        ["group"] + [f"N{l}" for l in range(1, k + 1)],
        [[g + 1] + [repr(float(x)) for x in beta_n[g]] for g in range(beta_n.shape[0])],
    )
    _write_csv(
        out / "intensities_nonn.csv",
        ["group"] + CLASS_COLS,
        [[g + 1] + [repr(float(x)) for x in beta_nonn[g]] for g in range(beta_nonn.shape[0])],
    )

    subset = _subsample_draws(draws, args.max_draws)
    result = two_step_summary(subset, args.nsims, _rng(args.seed), args.horizon)
    _write_two_step(out, result, k)
    print(f"wrote posterior-mean tables to {out}")
    return 0


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="diarymc",
        description="Bleeding-diary model: ingest, fit, simulate, predict "
        f"(kernel backend: {_kernels.BACKEND})",
    )
    parser.add_argument("--config", help="optional key=value file; flags win over it")
    sub = parser.add_subparsers(dest="command", required=True)

    def add_io(p):
        p.add_argument("--input", required=True, help="diary CSV path")
        p.add_argument("--format", default="long_csv", choices=["long_csv", "compact_csv"])

    def add_out(p):
        p.add_argument("--out-dir", default=".", dest="out_dir")

    p = sub.add_parser("validate", help="check a dataset file")
    add_io(p)
    p.set_defaults(func=cmd_validate)

    p = sub.add_parser("episodes", help="dump extracted episodes as CSV")
    add_io(p)
    add_out(p)
    p.set_defaults(func=cmd_episodes)

    p = sub.add_parser("simulate", help="write a synthetic diary dataset from a params JSON")
    p.add_argument("--params", required=True)
    p.add_argument("--arm-sizes", default="54,56,53", dest="arm_sizes")
    p.add_argument("--days", type=int, default=360)
    p.add_argument("--format", default="long_csv", choices=["long_csv", "compact_csv"])
    p.add_argument("--seed", type=int, default=DEFAULT_SEED)
    add_out(p)
    p.set_defaults(func=cmd_simulate)

    p = sub.add_parser("fit", help="run the Gibbs sampler and write draws + diagnostics")
    add_io(p)
    add_out(p)
    p.add_argument("--seed", type=int, default=DEFAULT_SEED)
    p.add_argument("--k", type=int, default=4)
    p.add_argument("--burnin", type=int, default=5000)
    p.add_argument("--draws", type=int, default=5000)
    p.add_argument("--thin", type=int, default=5)
    p.add_argument("--chains", type=int, default=2)
    p.add_argument("--share-beta-n", dest="share_beta_n", action="store_true", default=True)
    p.add_argument("--no-share-beta-n", dest="share_beta_n", action="store_false")
    p.add_argument(
        "--share-beta-nonn", dest="share_beta_nonn", action="store_true", default=False
    )
    p.add_argument("--no-share-beta-nonn", dest="share_beta_nonn", action="store_false")
    p.add_argument("--store-latents", dest="store_latents", action="store_true")
    p.set_defaults(func=cmd_fit)

    p = sub.add_parser("predict-generic", help="generic-individual predictions per arm")
    p.add_argument("--params", required=True, help="full or reduced params JSON")
    p.add_argument("--times", default="30,60,90,120,150,180,210,240,270,300,330,360")
    p.add_argument("--nsims", type=int, default=10000)
    p.add_argument("--horizon", type=float, default=3000.0)
    p.add_argument("--window", type=float, default=180.0)
    p.add_argument("--seed", type=int, default=DEFAULT_SEED)
    add_out(p)
    p.set_defaults(func=cmd_predict_generic)

    p = sub.add_parser("predict-subject", help="subject-conditional prediction")
    add_io(p)
    add_out(p)
    p.add_argument("--subject", required=True)
    p.add_argument("--draws-file", dest="draws_file")
    p.add_argument("--params")
    p.add_argument("--max-draws", dest="max_draws", type=int, default=500,
                   help="evenly subsample this many draws from --draws-file")
    p.add_argument("--times", default="30,60,90,120,150,180,210,240,270,300,330,360")
    p.add_argument("--nsims", type=int, default=200, help="simulations per draw")
    p.add_argument("--sweeps", type=int, default=50)
    p.add_argument("--horizon", type=float, default=720.0)
    p.add_argument("--window", type=float, default=180.0)
    p.add_argument("--seed", type=int, default=DEFAULT_SEED)
    p.set_defaults(func=cmd_predict_subject)

    p = sub.add_parser("two-step", help="same-phase one-return transition tables")
    p.add_argument("--draws-file", dest="draws_file")
    p.add_argument("--params")
    p.add_argument("--max-draws", dest="max_draws", type=int, default=200)
    p.add_argument("--nsims", type=int, default=500)
    p.add_argument("--horizon", type=float, default=200000.0)
    p.add_argument("--seed", type=int, default=DEFAULT_SEED)
    add_out(p)
    p.set_defaults(func=cmd_two_step)

    p = sub.add_parser("summarize", help="posterior-mean tables from a draws file")
    p.add_argument("--draws-file", dest="draws_file", required=True)
    p.add_argument("--max-draws", dest="max_draws", type=int, default=200,
                   help="draw subsample for the simulation-based two-step tables")
    p.add_argument("--nsims", type=int, default=200)
    p.add_argument("--horizon", type=float, default=200000.0)
    p.add_argument("--seed", type=int, default=DEFAULT_SEED)
    add_out(p)
    p.set_defaults(func=cmd_summarize)

    return parser


def _apply_config(args, parser_namespace_defaults, argv) -> None:
    """Fill unset options from the key=value config file; flags win."""
    if not args.config:
        return
    text = Path(args.config).read_text()
    explicit = set()
    for token in argv:
        if token.startswith("--"):
            explicit.add(token[2:].split("=")[0].replace("-", "_"))
    for lineno, line in enumerate(text.splitlines(), start=1):
        line = line.strip()
        if not line or line.startswith("#"):
            continue
        if "=" not in line:
            raise ValueError(f"{args.config}:{lineno}: expected key=value")
        key, _, raw = line.partition("=")
        key = key.strip().replace("-", "_")
        if key not in _CONFIG_TYPES:
            raise ValueError(f"{args.config}:{lineno}: unknown key {key!r}")
        if key in explicit or not hasattr(args, key):
            continue
        setattr(args, key, _CONFIG_TYPES[key](raw.strip()))


def main(argv=None) -> int:
    argv = list(sys.argv[1:]) if argv is None else list(argv)
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        _apply_config(args, parser, argv)
        return args.func(args)
    except _VALIDATION_ERRORS as exc:
        sys.stderr.write(
            json.dumps({"error": type(exc).__name__, "message": str(exc)}) + "\n"
        )
        return 1
    except Exception as exc:  # runtime failure
        sys.stderr.write(
            json.dumps({"error": type(exc).__name__, "message": str(exc)}) + "\n"
        )
        return 2


if __name__ == "__main__":
    sys.exit(main())
