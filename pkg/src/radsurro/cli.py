"""Command-line entry point: solve a case, generate datasets, train, tune,
evaluate, benchmark and validate, all from one JSON run configuration.
"""

from __future__ import annotations

import argparse
import csv
import json
import logging
import os
import sys

import numpy as np

from . import dtrm, nn, tuner
from .config import ConfigError, RunConfig
from .datasets import cnn_view, load_dataset, mlp_view, normalize, save_dataset
from .evalbench import relative_error, speedup_benchmark, validate_physics, emit_plot_data
from .mesh import wall_ranges
from .sampling import generate_dataset, lhs, realize_case

log = logging.getLogger("radsurro")


def _write_json(path, doc):
    os.makedirs(os.path.dirname(os.path.abspath(path)), exist_ok=True)
    with open(path, "w", encoding="utf-8") as f:
        json.dump(doc, f, indent=2, sort_keys=True)
        f.write("\n")


def _target_slice(cfg: RunConfig):
    mesh = cfg.mesh()
    if cfg.target == "all":
        return slice(0, mesh.n_boundary)
    rng = wall_ranges(mesh)[cfg.target]
    return slice(rng.start, rng.stop)


def _load_case(cfg: RunConfig, case_path):
    mesh = cfg.mesh()
    grid = cfg.band_grid()
    table = cfg.absorption_table()
    if case_path:
        with open(case_path, encoding="utf-8") as f:
            doc = json.load(f)
        gas = cfg.doc["gas"]
        return dtrm.FurnaceCase(
            mesh=mesh,
            eps=np.asarray(doc["eps"], dtype=float),
            T0=np.asarray(doc["T0"], dtype=float),
            T=np.asarray(doc["T"], dtype=float),
            p=doc.get("p", gas["p"]),
            x_co2=doc.get("x_co2", gas["x_co2"]),
            x_h2o=doc.get("x_h2o", gas["x_h2o"]),
            x_co=doc.get("x_co", gas["x_co"]),
            grid=grid, table=table,
        )
    dist = cfg.distribution()
    row = lhs(1, dist.n_dims, cfg.doc["dataset"]["seed"])[0]
    return realize_case(row, dist, mesh, grid, table)


def cmd_solve(cfg: RunConfig, args):
    case = _load_case(cfg, args.case)
    solver = cfg.doc["solver"]
    res = dtrm.solve(case, n_rays=cfg.doc["n_rays"],
                     tolerance=solver["tolerance"], max_iters=solver["max_iters"])
    _write_json(os.path.join(args.out, "irradiation.json"), {
        "H": res.H.tolist(),
        "iterations": res.iterations,
        "residual": res.residual,
        "config_hash": cfg.config_hash(),
    })
    return 0


def cmd_gen_dataset(cfg: RunConfig, args):
    ds = cfg.doc["dataset"]
    solver = cfg.doc["solver"]
    raw = generate_dataset(
        cfg.distribution(), cfg.mesh(), cfg.band_grid(), cfg.absorption_table(),
        n_train=ds["n_train"], n_test=ds["n_test"], seed=ds["seed"],
        n_rays=cfg.doc["n_rays"], tolerance=solver["tolerance"],
        max_iters=solver["max_iters"], threads=args.threads,
    )
    save_dataset(raw, os.path.join(args.out, "dataset"), config_hash=cfg.config_hash())
    return 0


def _views(cfg: RunConfig, raw, scalers):
    norm, _ = normalize(raw, scalers)
    spec = cfg.network_spec()
    if spec.kind == "mlp":
        x = mlp_view(norm["eps"], norm["T0"], norm["T"])
    else:
        x = cnn_view(norm["eps"], norm["T0"], norm["T"], raw.mesh)
    y = norm["H"][:, _target_slice(cfg)]
    return x, y, spec


def cmd_train(cfg: RunConfig, args):
    raw, scalers = load_dataset(args.dataset)
    x, y, spec = _views(cfg, raw, scalers)
    tr, te = raw.split()
    if spec.kind == "mlp":
        model = nn.build_mlp(spec, x.shape[1], y.shape[1])
    else:
        model = nn.build_cnn(spec, x.shape[1:], y.shape[1])
    result = nn.train(model, x[tr], y[tr], cfg.train_config())
    model.metadata["config_hash"] = cfg.config_hash()
    model.metadata["target"] = cfg.target
    os.makedirs(args.out, exist_ok=True)
    nn.save_model(model, os.path.join(args.out, "model.rmdl"))
    with open(os.path.join(args.out, "loss_history.csv"), "w", newline="", encoding="utf-8") as f:
        writer = csv.writer(f)
        writer.writerow(["epoch", "train_loss"])
        for i, loss in enumerate(result.train_loss, start=1):
            writer.writerow([i, f"{loss:.8g}"])
    log.info("trained %s for %d epochs in %.1f s", spec.kind, result.epochs_run, result.wall_clock)
    return 0


def cmd_tune(cfg: RunConfig, args):
    raw, scalers = load_dataset(args.dataset)
    x, y, spec = _views(cfg, raw, scalers)
    tr, _ = raw.split()
    space = tuner.SearchSpace(kind=spec.kind)
    tune_cfg = cfg.doc["tune"]
    os.makedirs(args.out, exist_ok=True)
    best, ledger = tuner.run_study(
        space, x[tr], y[tr],
        n_trials=tune_cfg["n_trials"], budget_epochs=tune_cfg["budget_epochs"],
        seed=cfg.doc["train"]["seed"],
        ledger_path=os.path.join(args.out, "trials.jsonl"),
        train_config=cfg.train_config(),
    )
    _write_json(os.path.join(args.out, "best_spec.json"),
                {"spec": best.to_json(), "config_hash": cfg.config_hash()})
    return 0


def cmd_eval(cfg: RunConfig, args):
    raw, scalers = load_dataset(args.dataset)
    x, y, spec = _views(cfg, raw, scalers)
    _, te = raw.split()
    model = nn.load_model(args.model, output_dim=y.shape[1])
    pred_n = nn.predict(model, x[te])
    h_scaler = scalers["H"]
    sel = _target_slice(cfg)
    pred = h_scaler.inverse(pred_n.astype(np.float64))
    ref = raw.H[te][:, sel]
    mesh = raw.mesh
    if cfg.target == "all":
        report = relative_error(pred, ref, mesh, dataset_id=args.dataset, model_id=args.model)
        os.makedirs(args.out, exist_ok=True)
        emit_plot_data(report, mesh,
                       os.path.join(args.out, "error_curve.csv"),
                       os.path.join(args.out, "wall_markers.csv"))
    else:
        per_point = np.mean(np.abs(pred - ref) / ref, axis=0)
        from .evalbench import ErrorReport
        report = ErrorReport(
            per_point=per_point, mean=float(per_point.mean()), std=float(per_point.std()),
            per_wall={cfg.target: {"mean": float(per_point.mean()), "std": float(per_point.std())}},
            dataset_id=args.dataset, model_id=args.model,
        )
    doc = report.to_json()
    doc["config_hash"] = cfg.config_hash()
    _write_json(os.path.join(args.out, "error_report.json"), doc)
    return 0


def cmd_bench(cfg: RunConfig, args):
    raw, scalers = load_dataset(args.dataset)
    x, y, spec = _views(cfg, raw, scalers)
    _, te = raw.split()
    model = nn.load_model(args.model, output_dim=y.shape[1])
    grid = cfg.band_grid()
    table = cfg.absorption_table()
    gas = cfg.doc["gas"]
    n_cases = min(5, raw.n_test)
    cases = []
    for i in range(raw.n_train, raw.n_train + n_cases):
        cases.append(dtrm.FurnaceCase(
            mesh=raw.mesh, eps=raw.eps[i], T0=raw.T0[i], T=raw.T[i],
            p=gas["p"], x_co2=gas["x_co2"], x_h2o=gas["x_h2o"], x_co=gas["x_co"],
            grid=grid, table=table,
        ))
    report = speedup_benchmark(
        model, cases, x[te], n_rays=cfg.doc["n_rays"],
        training_seconds=model.metadata.get("train_wall_clock") or 0.0,
    )
    doc = report.to_json()
    doc["config_hash"] = cfg.config_hash()
    _write_json(os.path.join(args.out, "timing_report.json"), doc)
    return 0


def cmd_validate(cfg: RunConfig, args):
    checks = validate_physics()
    doc = {
        "checks": [
            {"name": c.name, "residual": c.residual, "tolerance": c.tolerance, "passed": c.passed}
            for c in checks
        ],
        "passed": all(c.passed for c in checks),
        "config_hash": cfg.config_hash(),
    }
    _write_json(os.path.join(args.out, "physics_report.json"), doc)
    for c in checks:
        print(f"{'PASS' if c.passed else 'FAIL'} {c.name}: residual {c.residual:.3e} "
              f"(tolerance {c.tolerance:g})")
    return 0 if doc["passed"] else 1


COMMANDS = {
    "solve": cmd_solve,
    "gen-dataset": cmd_gen_dataset,
    "train": cmd_train,
    "tune": cmd_tune,
    "eval": cmd_eval,
    "bench": cmd_bench,
    "validate": cmd_validate,
}


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="radsurro",
                                     description="DTRM furnace solver and surrogate toolkit")
    parser.add_argument("subcommand", choices=sorted(COMMANDS))
    parser.add_argument("--config", default=None, help="JSON run configuration")
    parser.add_argument("--set", dest="overrides", action="append", default=[],
                        metavar="KEY=VALUE", help="override a configuration value (repeatable)")
    parser.add_argument("--threads", type=int, default=1)
    parser.add_argument("--deterministic", action="store_true",
                        help="force single-worker execution for bit-exact runs")
    parser.add_argument("--seed", type=int, default=None)
    parser.add_argument("--out", default="out")
    parser.add_argument("--case", default=None, help="case JSON for the solve subcommand")
    parser.add_argument("--dataset", default=None, help="dataset directory (train/tune/eval/bench)")
    parser.add_argument("--model", default=None, help="model file (eval/bench)")
    return parser


def main(argv=None) -> int:
    logging.basicConfig(level=logging.INFO, format="%(levelname)s %(name)s: %(message)s")
    args = build_parser().parse_args(argv)
    if args.deterministic:
        args.threads = 1
    try:
        cfg = RunConfig.load(args.config, overrides=args.overrides, seed=args.seed)
    except (ConfigError, FileNotFoundError) as exc:
        _write_json(os.path.join(args.out, "error.json"), {"error": str(exc)})
        print(f"error: {exc}", file=sys.stderr)
        return 2
    needs_dataset = args.subcommand in ("train", "tune", "eval", "bench")
    if needs_dataset and not args.dataset:
        args.dataset = os.path.join(args.out, "dataset")
    if args.subcommand in ("eval", "bench") and not args.model:
        args.model = os.path.join(args.out, "model.rmdl")
    try:
        return COMMANDS[args.subcommand](cfg, args)
    except Exception as exc:  # noqa: BLE001 - report and exit nonzero
        _write_json(os.path.join(args.out, "error.json"),
                    {"error": str(exc), "type": type(exc).__name__})
        print(f"error: {exc}", file=sys.stderr)
        return 1


if __name__ == "__main__":
    sys.exit(main())
