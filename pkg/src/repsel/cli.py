"""Command-line surface.

Subcommands: fit, eval, simulate, diagnose, cayley, validate. Standard
error carries logs (including the resolved configuration and seed of every
run); standard output carries nothing machine-readable - results go to
files. Exit codes: 0 success, 2 usage or input parse error, 3 numerical
divergence, 4 resource guard exceeded.
"""

from __future__ import annotations

import argparse
import sys
from typing import Optional, Sequence

from .core import RankingDataset
from .decompose import stage_counts
from .estimate import DivergenceError, FitConfig, fit
from .evaluate import (
    RiskExperimentConfig,
    kfold_eval,
    position_profile,
    risk_experiment,
    tail_bundle_stats,
)
from .io import (
    PreflibParseError,
    export_cayley,
    parse_preflib,
    read_params,
    write_params,
    write_results_csv,
)
from .spectral import DimensionGuardError, certify

EXIT_OK = 0
EXIT_USAGE = 2
EXIT_DIVERGED = 3
EXIT_GUARD = 4

_MODEL_FLAGS = {
    "pl": "pl",
    "crs-full": "crs_full",
    "crs-factor": "crs_factor",
    "mallows": "mallows",
}


def _log(msg: str) -> None:
    print(msg, file=sys.stderr)


def _echo_config(args: argparse.Namespace) -> None:
    resolved = {k: v for k, v in sorted(vars(args).items()) if k != "func"}
    _log(f"resolved config: {resolved}")


def _load_dataset(path: str) -> RankingDataset:
    with open(path) as fh:
        return parse_preflib(fh.read())


def _batch_size(text: str):
    if text == "full":
        return "full"
    value = int(text)
    if value < 1:
        raise argparse.ArgumentTypeError("batch size must be positive or 'full'")
    return value


def _int_list(text: str) -> tuple[int, ...]:
    try:
        return tuple(int(p) for p in text.split(",") if p)
    except ValueError:
        raise argparse.ArgumentTypeError(f"expected comma-separated integers, got {text!r}")


def _fit_config(args: argparse.Namespace, rank: Optional[int]) -> FitConfig:
    return FitConfig(
        learning_rate=args.lr,
        epochs=args.epochs,
        batch_size=args.batch,
        seed=args.seed,
        rank=rank,
    )


# --- subcommand handlers ------------------------------------------------------


def _cmd_fit(args: argparse.Namespace) -> int:
    kind = _MODEL_FLAGS[args.model]
    if kind == "crs_factor" and args.rank is None:
        raise UsageError("--rank is required with --model crs-factor")
    ds = _load_dataset(args.data)
    report = fit(kind, ds, _fit_config(args, args.rank))
    write_params(report.final_params, args.out)
    _log(f"train NLL per ranking: {report.train_nll_per_ranking!r}")
    _log(f"train NLL per choice:  {report.train_nll_per_choice!r}")
    _log(f"wrote parameters to {args.out}")
    return EXIT_OK


def _cmd_eval(args: argparse.Namespace) -> int:
    kind = _MODEL_FLAGS[args.model]
    if kind == "crs_factor" and args.rank is None:
        raise UsageError("--rank is required with --model crs-factor")
    ds = _load_dataset(args.data)
    cfg = _fit_config(args, args.rank)
    cv = kfold_eval(ds, kind, args.folds, cfg, args.seed, threads=args.threads)
    # position profile of the full-data fit, evaluated on the same data
    report = fit(kind, ds, cfg)
    profile = position_profile(report.final_params, ds)
    fieldnames = [
        "row_type",
        "model",
        "folds",
        "mean_test_nll_per_ranking",
        "sem",
        "position",
        "mean_log_likelihood",
        "count",
    ]
    rows: list[dict[str, object]] = [
        {
            "row_type": "summary",
            "model": kind,
            "folds": cv.folds,
            "mean_test_nll_per_ranking": cv.mean_test_nll_per_ranking,
            "sem": cv.sem,
            "position": "",
            "mean_log_likelihood": "",
            "count": "",
        }
    ]
    for k, (mean_ll, count) in enumerate(profile.per_position, start=1):
        rows.append(
            {
                "row_type": "position",
                "model": kind,
                "folds": "",
                "mean_test_nll_per_ranking": "",
                "sem": "",
                "position": k,
                "mean_log_likelihood": mean_ll,
                "count": count,
            }
        )
    write_results_csv(rows, args.out, fieldnames=fieldnames)
    _log(
        f"cv mean test NLL per ranking: {cv.mean_test_nll_per_ranking!r} "
        f"(sem {cv.sem!r}, {cv.folds} folds)"
    )
    return EXIT_OK


def _spread_path(out: str) -> str:
    head, dot, ext = out.rpartition(".")
    if dot and "/" not in ext:
        return f"{head}_spread.{ext}"
    return out + "_spread"


def _cmd_simulate(args: argparse.Namespace) -> int:
    kind = _MODEL_FLAGS[args.model]
    cfg = RiskExperimentConfig(
        model_kind=kind,
        n_grid=args.n,
        ell_grid=args.ell,
        fit_cfg=FitConfig(
            learning_rate=args.lr,
            epochs=args.epochs,
            batch_size=args.batch,
            rank=args.rank,
        ),
        rank=args.rank,
        B=args.B,
        trials=args.trials,
        seed=args.seed,
    )
    table = risk_experiment(cfg, threads=args.threads)
    write_results_csv(
        table,
        args.out,
        fieldnames=["model_kind", "n", "rank", "ell", "trial", "squared_l2_risk"],
    )
    _log(f"wrote {len(table)} risk rows to {args.out}")
    if cfg.trials >= 10:
        spread = tail_bundle_stats(table)
        spread_path = _spread_path(args.out)
        write_results_csv(
            spread,
            spread_path,
            fieldnames=["n", "ell", "trials", "median", "iqr", "max_over_median"],
        )
        _log(f"wrote spread summary to {spread_path}")
    else:
        _log("skipping spread summary: fewer than 10 trials per cell")
    return EXIT_OK


def _cmd_diagnose(args: argparse.Namespace) -> int:
    ds = _load_dataset(args.data)
    cert = certify(ds, args.model, B=args.B)
    fieldnames = [
        "row_type",
        "matrix_kind",
        "dim",
        "lambda2",
        "lambda_max",
        "connected_or_identified",
        "bound_name",
        "bound_value",
        "holds",
    ]
    rows: list[dict[str, object]] = [
        {
            "row_type": "spectrum",
            "matrix_kind": cert.matrix_kind,
            "dim": cert.dim,
            "lambda2": cert.lambda2,
            "lambda_max": cert.lambda_max,
            "connected_or_identified": cert.connected_or_identified,
            "bound_name": "",
            "bound_value": "",
            "holds": "",
        }
    ]
    for check in cert.bound_checks:
        rows.append(
            {
                "row_type": "bound",
                "matrix_kind": cert.matrix_kind,
                "dim": "",
                "lambda2": "",
                "lambda_max": "",
                "connected_or_identified": "",
                "bound_name": check.name,
                "bound_value": check.bound_value,
                "holds": check.holds,
            }
        )
    write_results_csv(rows, args.out, fieldnames=fieldnames)
    verdict = "connected/identified" if cert.connected_or_identified else "NOT identified"
    _log(f"{cert.matrix_kind}: lambda2={cert.lambda2!r} ({verdict})")
    return EXIT_OK


def _cmd_cayley(args: argparse.Namespace) -> int:
    if args.n > 6:
        raise UsageError(f"cayley export supports n <= 6, got n={args.n}")
    params_list = [read_params(p) for p in args.params]
    export_cayley(params_list, args.n, args.out)
    _log(f"wrote Cayley graph for n={args.n} with {len(params_list)} model(s) to {args.out}")
    return EXIT_OK


def _cmd_validate(args: argparse.Namespace) -> int:
    ds = _load_dataset(args.data)
    hist = stage_counts(ds)
    _log(
        f"ok: n={ds.universe.n}, {ds.num_rankings} weighted rankings "
        f"({len(ds.rankings)} unique), choice-set sizes {hist}"
    )
    return EXIT_OK


class UsageError(ValueError):
    """Flag combination errors detected after argparse."""


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="repsel",
        description="Repeated-selection ranking models: fit, evaluate, simulate, diagnose.",
    )
    sub = parser.add_subparsers(dest="command", required=True)

    def add_common_fit_flags(p: argparse.ArgumentParser, with_model: bool = True) -> None:
        if with_model:
            p.add_argument(
                "--model", required=True, choices=sorted(_MODEL_FLAGS), help="model family"
            )
            p.add_argument("--rank", type=int, default=None, help="rank r for crs-factor (default: None)")
        p.add_argument("--epochs", type=int, default=10, help="Adam epochs (default: 10)")
        p.add_argument("--lr", type=float, default=0.001, help="Adam learning rate (default: 0.001)")
        p.add_argument(
            "--batch",
            type=_batch_size,
            default="full",
            help="mini-batch size or 'full' (default: full)",
        )
        p.add_argument("--seed", type=int, default=0, help="seed for all randomness (default: 0)")

    p_fit = sub.add_parser("fit", help="fit one model and write its parameter file")
    p_fit.add_argument("--data", required=True, help="Preflib SOC/SOI ballot file")
    add_common_fit_flags(p_fit)
    p_fit.add_argument("--out", required=True, help="output parameter document path")
    p_fit.set_defaults(func=_cmd_fit)

    p_eval = sub.add_parser("eval", help="k-fold CV test NLL plus position profile")
    p_eval.add_argument("--data", required=True, help="Preflib SOC/SOI ballot file")
    add_common_fit_flags(p_eval)
    p_eval.add_argument("--folds", type=int, default=5, help="CV folds (default: 5)")
    p_eval.add_argument("--threads", type=int, default=1, help="worker threads for folds (default: 1)")
    p_eval.add_argument("--out", required=True, help="output CSV path")
    p_eval.set_defaults(func=_cmd_eval)

    p_sim = sub.add_parser("simulate", help="risk-convergence experiment grid")
    p_sim.add_argument(
        "--model", required=True, choices=["pl", "crs-full", "crs-factor"], help="model family"
    )
    p_sim.add_argument("--n", required=True, type=_int_list, help="comma-separated universe sizes")
    p_sim.add_argument("--rank", type=int, default=None, help="rank r for crs-factor (default: None)")
    p_sim.add_argument("--B", type=float, default=1.5, help="ground-truth bound (default: 1.5)")
    p_sim.add_argument("--ell", required=True, type=_int_list, help="comma-separated dataset sizes")
    p_sim.add_argument("--trials", type=int, default=20, help="trials per cell (default: 20)")
    p_sim.add_argument("--epochs", type=int, default=10, help="Adam epochs per fit (default: 10)")
    p_sim.add_argument("--lr", type=float, default=0.001, help="Adam learning rate (default: 0.001)")
    p_sim.add_argument(
        "--batch", type=_batch_size, default="full", help="mini-batch size or 'full' (default: full)"
    )
    p_sim.add_argument("--seed", type=int, default=0, help="seed for all randomness (default: 0)")
    p_sim.add_argument("--threads", type=int, default=1, help="worker threads for trials (default: 1)")
    p_sim.add_argument("--out", required=True, help="risk table CSV path")
    p_sim.set_defaults(func=_cmd_simulate)

    p_diag = sub.add_parser("diagnose", help="spectral identifiability certificate")
    p_diag.add_argument("--data", required=True, help="Preflib SOC/SOI ballot file")
    p_diag.add_argument(
        "--model", required=True, choices=["pl", "crs"], help="certificate family"
    )
    p_diag.add_argument("--B", type=float, default=1.5, help="bound-line parameter B (default: 1.5)")
    p_diag.add_argument("--out", required=True, help="certificate CSV path")
    p_diag.set_defaults(func=_cmd_diagnose)

    p_cay = sub.add_parser("cayley", help="Cayley-graph DOT/CSV export with model PMFs")
    p_cay.add_argument("--n", required=True, type=int, help="universe size (n <= 6)")
    p_cay.add_argument(
        "--params",
        required=True,
        type=lambda s: [p for p in s.split(",") if p],
        help="comma-separated parameter document paths",
    )
    p_cay.add_argument("--out", required=True, help="DOT output path (CSV twin lands beside it)")
    p_cay.set_defaults(func=_cmd_cayley)

    p_val = sub.add_parser("validate", help="parse a ballot file and report its shape")
    p_val.add_argument("--data", required=True, help="Preflib SOC/SOI ballot file")
    p_val.set_defaults(func=_cmd_validate)

    return parser


def main(argv: Optional[Sequence[str]] = None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:  # argparse exits 2 on usage errors, 0 on --help
        return int(exc.code or 0)
    _echo_config(args)
    try:
        return args.func(args)
    except DivergenceError as exc:
        _log(f"error: {exc}")
        return EXIT_DIVERGED
    except DimensionGuardError as exc:
        _log(f"error: {exc}")
        return EXIT_GUARD
    except (UsageError, PreflibParseError, ValueError, OSError) as exc:
        _log(f"error: {exc}")
        return EXIT_USAGE


def entrypoint() -> None:
    raise SystemExit(main(sys.argv[1:]))
