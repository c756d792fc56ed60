"""Command-line entry point: ``sdrenet {gen,train,eval,simulate}``.

Exit status: 0 on success, 2 for configuration errors, 3 for missing or
malformed files, 4 for numerical failures, 1 for anything else.
"""

import argparse
import csv
import json
import logging
import math
import sys
import time
from concurrent.futures import ThreadPoolExecutor
from pathlib import Path

import numpy as np

from . import dataset as dsmod
from .config import dump_config, load_config
from .errors import (
    DegenerateTargets,
    EmptyDataset,
    FormatError,
    InvalidConfig,
    NonFiniteLoss,
    NonFiniteState,
    SdreNetError,
)
from .fnn import (
    Architecture,
    LossWeights,
    forward,
    init_params,
    input_gradient,
    load_checkpoint,
    mse_loss,
    r_squared,
    save_checkpoint,
    train,
)
from .models import grid, make_system
from .sdre import linear_gain_at_origin
from .simulator import (
    LinearFeedback,
    NetworkControl,
    SdreControl,
    ValueNetworkControl,
    ZeroControl,
    simulate,
    write_trajectory_csv,
)

log = logging.getLogger("sdrenet")

EXIT_OK, EXIT_FAIL, EXIT_CONFIG, EXIT_IO, EXIT_NUMERIC = 0, 1, 2, 3, 4


# -- helpers ------------------------------------------------------------------


def build_system(cfg):
    try:
        return make_system(cfg.system.name, **cfg.system.params)
    except TypeError as exc:
        raise InvalidConfig(f"bad parameters for system {cfg.system.name!r}: {exc}") from None


def _box(cfg, sys):
    lower = sys.domain_lower if cfg.sampling.lower is None else cfg.sampling.lower
    upper = sys.domain_upper if cfg.sampling.upper is None else cfg.sampling.upper
    return np.broadcast_to(np.asarray(lower, float), (sys.n,)), np.broadcast_to(np.asarray(upper, float), (sys.n,))


def _json_clean(obj):
    """JSON-safe copy: numpy scalars unwrapped, NaN and inf mapped to None."""
    if isinstance(obj, dict):
        return {k: _json_clean(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple)):
        return [_json_clean(v) for v in obj]
    if isinstance(obj, np.ndarray):
        return _json_clean(obj.tolist())
    if isinstance(obj, np.generic):
        obj = obj.item()
    if isinstance(obj, float) and not math.isfinite(obj):
        return None
    return obj


def write_json(path, obj):
    with open(path, "w") as fh:
        json.dump(_json_clean(obj), fh, indent=2, sort_keys=True)
        fh.write("\n")


def _fmt(v):
    if isinstance(v, float):
        return format(v, ".17g")
    return v


def write_rows(path, rows):
    keys = list(rows[0]) if rows else []
    for r in rows:
        keys += [k for k in r if k not in keys]
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(keys)
        for r in rows:
            w.writerow([_fmt(r.get(k, "")) for k in keys])


def _require(path, what):
    if not Path(path).exists():
        raise FileNotFoundError(f"{what} not found: {path}")


def _check_model_system(meta, sys, path):
    sysmeta = meta.get("system")
    if sysmeta is None:
        return
    if sysmeta.get("name") != sys.name or sysmeta.get("params") != dsmod._jsonable(sys.params):
        raise FormatError(f"{path}: checkpoint was trained on {sysmeta.get('name')} "
                          f"{sysmeta.get('params')}, config asks for {sys.name} {sys.params}")


def value_feedback(params, sys, X):
    """u_V at each row of ``X`` with B evaluated at that state."""
    X = np.atleast_2d(X)
    G = input_gradient(params, X).reshape(len(X), -1)
    return np.array([-0.5 * np.linalg.solve(sys.R, sys.B(x).T @ g) for x, g in zip(X, G)])


def initial_state(spec, sys):
    """Resolve a simulation x0 spec into a state vector."""
    if isinstance(spec, (list, tuple)):
        x0 = np.asarray(spec, dtype=float)
    elif isinstance(spec, dict):
        kind = spec.get("kind")
        if kind == "zeros":
            x0 = np.zeros(sys.n)
        elif kind == "constant":
            x0 = np.full(sys.n, float(spec["value"]))
        elif kind == "allen_cahn_bump":
            xi = grid(sys.n)
            x0 = 1.0 + (1.0 - xi) * xi
        elif kind == "spaced":
            # equally spaced entries per block (positions, then velocities)
            blocks = int(spec.get("blocks", 2 if sys.name == "cucker_smale" else 1))
            if sys.n % blocks:
                raise InvalidConfig(f"x0 blocks={blocks} does not divide n={sys.n}")
            lo, hi = float(spec.get("lo", 0.0)), float(spec.get("hi", 1.0))
            x0 = np.tile(np.linspace(lo, hi, sys.n // blocks), blocks)
        elif kind == "values":
            x0 = np.asarray(spec["values"], dtype=float)
        else:
            raise InvalidConfig(f"unknown x0 kind {kind!r}")
    else:
        raise InvalidConfig("simulation.x0 must be a list or a mapping with 'kind'")
    if x0.shape != (sys.n,):
        raise InvalidConfig(f"x0 has shape {x0.shape}, expected ({sys.n},)")
    return x0


def _prepare_run_dir(cfg):
    run = cfg.run_dir()
    run.mkdir(parents=True, exist_ok=True)
    dump_config(cfg, run / "config.yaml")
    return run


# -- commands -----------------------------------------------------------------


def cmd_gen(cfg, threads=1):
    sys_ = build_system(cfg)
    lower, upper = _box(cfg, sys_)
    sampler = dsmod.HaltonSampler(sys_.n, start_index=cfg.sampling.start_index)
    states = dsmod.sample_states(sampler, cfg.sampling.N_s, lower, upper)
    t0 = time.perf_counter()
    ds = dsmod.generate(sys_, states, cfg.sampling.tolerance, threads=threads)
    ds.lower, ds.upper = lower.copy(), upper.copy()
    ds.meta.update({"N_s": cfg.sampling.N_s, "start_index": cfg.sampling.start_index, "sampler": "halton"})
    wall = time.perf_counter() - t0
    if len(ds) == 0:
        raise EmptyDataset("every sample failed; no dataset written")
    run = _prepare_run_dir(cfg)
    path = cfg.dataset_path()
    path.parent.mkdir(parents=True, exist_ok=True)
    dsmod.save(ds, path, run / "manifest.json")
    print(f"N_s={cfg.sampling.N_s} kept={len(ds)} discarded={ds.meta['discarded']} wall={wall:.2f}s -> {path}")
    return ds


def _manifest_for(cfg, dataset_path):
    own = cfg.run_dir() / "manifest.json"
    if cfg.paths.dataset is None or Path(dataset_path).parent == cfg.run_dir():
        return own
    return Path(dataset_path).parent / "manifest.json"


def load_dataset(cfg, sys_=None):
    path = cfg.dataset_path()
    _require(path, "dataset")
    manifest = _manifest_for(cfg, path)
    _require(manifest, "dataset manifest")
    ds = dsmod.load(path, manifest)
    if sys_ is not None:
        if (ds.n, ds.m) != (sys_.n, sys_.m):
            raise FormatError(f"{path}: dataset dimensions ({ds.n}, {ds.m}) do not match the system")
        err = dsmod.consistency_error(ds, sys_)
        if err > 1e-10:
            raise FormatError(f"{path}: records are inconsistent with {sys_.name} (err {err:.2e})")
    return ds


def _summary(params, ds, mode, sys_):
    """Per-variable r^2/MSE, with DegenerateTargets reported instead of raised."""
    out = {}
    if len(ds) == 0:
        return {"error": "EmptyDataset: no validation records"}
    preds = {}
    if mode == "direct":
        preds["u_theta"] = (forward(params, ds.X), ds.U)
    else:
        preds["V"] = (forward(params, ds.X)[:, 0], ds.V)
        preds["dV"] = (input_gradient(params, ds.X).reshape(len(ds), -1), ds.G)
        preds["u_V"] = (value_feedback(params, sys_, ds.X), ds.U)
    for name, (p, t) in preds.items():
        entry = {"mse": mse_loss(p, t)}
        try:
            entry["r2"] = r_squared(p, t)
        except DegenerateTargets as exc:
            entry["r2"] = None
            entry["r2_error"] = f"DegenerateTargets: {exc}"
        out[name] = entry
    return out


def cmd_train(cfg, threads=1):
    sys_ = build_system(cfg)
    ds = load_dataset(cfg, sys_)
    tc = cfg.training
    if len(ds) == 1:
        tr, va = ds, ds.subset([])
    else:
        tr, va = dsmod.split(ds, tc.train_fraction, tc.split_seed)
    n_out = 1 if tc.loss_mode == "value" else sys_.m
    arch = Architecture.uniform(sys_.n, tc.hidden_layers, tc.width, n_out, tc.activation)
    params = init_params(arch, tc.seed)
    weights = LossWeights(tc.mu_V, tc.mu_dV)
    feedback = (sys_.B(np.zeros(sys_.n)), sys_.R) if tc.loss_mode == "value" else None
    t0 = time.perf_counter()
    best, history = train(
        params, tr, va, loss_mode=tc.loss_mode, weights=weights, epochs=tc.epochs,
        batch_size=tc.batch_size, lbfgs_memory=tc.lbfgs_memory, seed=tc.seed,
        iters_per_batch=tc.iters_per_batch, feedback=feedback,
    )
    wall = time.perf_counter() - t0
    scores = [h["val_r2"] for h in history]
    best_epoch = None
    if any(math.isfinite(s) for s in scores):
        best_epoch = history[int(np.nanargmax(scores))]["epoch"]

    run = _prepare_run_dir(cfg)
    meta = {
        "loss_mode": tc.loss_mode,
        "mu_V": tc.mu_V,
        "mu_dV": tc.mu_dV,
        "seed": tc.seed,
        "epochs": tc.epochs,
        "best_epoch": best_epoch,
        "system": {"name": sys_.name, "params": dsmod._jsonable(sys_.params)},
    }
    model_path = cfg.model_path()
    model_path.parent.mkdir(parents=True, exist_ok=True)
    save_checkpoint(model_path, best, _json_clean(meta))
    write_rows(run / "history.csv", history)
    summary = {
        "loss_mode": tc.loss_mode,
        "n_train": len(tr),
        "n_val": len(va),
        "best_epoch": best_epoch,
        "validation": _summary(best, va, tc.loss_mode, sys_),
    }
    if len(va) == 0:
        summary["train"] = _summary(best, tr, tc.loss_mode, sys_)
    write_json(run / "train_summary.json", summary)
    for name, entry in (summary.get("validation") or {}).items():
        if isinstance(entry, dict):
            print(f"val {name}: r2={entry.get('r2')} mse={entry['mse']:.6g}")
    for name, entry in (summary.get("train") or {}).items():
        if isinstance(entry, dict) and entry.get("r2_error"):
            print(f"train {name}: {entry['r2_error']}")
    print(f"trained {len(history)} epochs in {wall:.1f}s, best epoch {best_epoch} -> {model_path}")
    return best, history


def cmd_eval(cfg, threads=1):
    sys_ = build_system(cfg)
    ec = cfg.evaluation
    lower, upper = _box(cfg, sys_)
    # Halton indices past the training block keep the evaluation points disjoint
    start = cfg.sampling.start_index + cfg.sampling.N_s
    sampler = dsmod.HaltonSampler(sys_.n, start_index=start)
    X = dsmod.sample_states(sampler, ec.N_eval, lower, upper)
    params = mode = None
    if ec.predictor == "model":
        path = cfg.model_path()
        _require(path, "checkpoint")
        params, meta = load_checkpoint(path)
        _check_model_system(meta, sys_, path)
        mode = meta.get("loss_mode", "direct" if params.n_out == sys_.m and sys_.m > 1 else "value")
        if params.n_in != sys_.n or params.n_out != (1 if mode == "value" else sys_.m):
            raise FormatError(f"{path}: network shape {params.layer_sizes} does not fit system {sys_.name}")
    t0 = time.perf_counter()
    ref = dsmod.generate(sys_, X, cfg.sampling.tolerance, threads=threads)
    wall = time.perf_counter() - t0
    if ec.predictor == "model":
        metrics = _summary(params, ref, mode, sys_)
    else:
        U = ref.U if ec.predictor == "sdre" else np.zeros_like(ref.U)
        metrics = {ec.predictor: _summary_u(U, ref.U)}
    report = {
        "predictor": ec.predictor,
        "loss_mode": mode,
        "N_eval": ec.N_eval,
        "start_index": start,
        "evaluated": len(ref),
        "discarded": ref.meta["discarded"],
        "metrics": metrics,
    }
    run = _prepare_run_dir(cfg)
    write_json(run / "eval.json", report)
    for name, entry in metrics.items():
        print(f"eval {name}: r2={entry.get('r2')} mse={entry.get('mse')}")
    print(f"{len(ref)} reference solves in {wall:.1f}s -> {run / 'eval.json'}")
    return report


def _summary_u(U, target):
    entry = {"mse": mse_loss(U, target)}
    try:
        entry["r2"] = r_squared(U, target)
    except DegenerateTargets as exc:
        entry["r2"] = None
        entry["r2_error"] = f"DegenerateTargets: {exc}"
    return entry


def _make_controller(spec, cfg, sys_):
    if isinstance(spec, dict):
        kind, label, ckpt = spec["kind"], spec.get("label"), spec.get("checkpoint")
    else:
        kind, label, ckpt = spec, None, None
    if kind == "zero":
        c = ZeroControl(sys_.m)
    elif kind == "sdre":
        c = SdreControl(sys_, cfg.simulation.refresh_steps, cfg.sampling.tolerance)
    elif kind == "linear_k0":
        c = LinearFeedback(linear_gain_at_origin(sys_, cfg.sampling.tolerance))
    else:
        path = Path(ckpt) if ckpt else cfg.model_path()
        _require(path, "checkpoint")
        params, meta = load_checkpoint(path)
        _check_model_system(meta, sys_, path)
        mode = meta.get("loss_mode", "value" if params.n_out == 1 else "direct")
        if mode == "value":
            c = ValueNetworkControl(params, sys_.B(np.zeros(sys_.n)), sys_.R)
        else:
            c = NetworkControl(params)
    if label:
        c.label = str(label)
    return c


def _run_one(sys_, controller, x0, sc):
    try:
        traj = simulate(sys_, controller, x0, sc.T, sc.dt, sc.substeps)
        return traj, None
    except NonFiniteState as exc:
        return exc.trajectory, exc


def cmd_simulate(cfg, threads=1):
    sys_ = build_system(cfg)
    sc = cfg.simulation
    x0 = initial_state(sc.x0, sys_)
    controllers = [_make_controller(s, cfg, sys_) for s in sc.controllers]
    labels = [c.label for c in controllers]
    if len(set(labels)) != len(labels):
        raise InvalidConfig(f"controller labels must be unique, got {labels}")
    if threads > 1 and len(controllers) > 1:
        with ThreadPoolExecutor(max_workers=threads) as pool:
            results = list(pool.map(lambda c: _run_one(sys_, c, x0, sc), controllers))
    else:
        results = [_run_one(sys_, c, x0, sc) for c in controllers]

    run = _prepare_run_dir(cfg)
    rows = []
    for c, (traj, err) in zip(controllers, results):
        write_trajectory_csv(traj, run / f"traj_{c.label}.csv")
        xf = traj.final_state
        rows.append({
            "controller": c.label,
            "cost": float(traj.cost[-1]),
            "final_time": float(traj.times[-1]),
            "final_norm": float(np.linalg.norm(xf)),
            "final_inf_norm": float(np.abs(xf).max()),
            "initial_norm": float(np.linalg.norm(x0)),
            "substeps": int(traj.meta["substeps"]),
            "diverged": int(err is not None),
        })
        status = f"DIVERGED at t={err.time:g}" if err is not None else "ok"
        print(f"{c.label}: cost={rows[-1]['cost']:.6g} |x(T)|inf={rows[-1]['final_inf_norm']:.3e} {status}")
    write_rows(run / "costs.csv", rows)
    return rows


COMMANDS = {"gen": cmd_gen, "train": cmd_train, "eval": cmd_eval, "simulate": cmd_simulate}


def build_parser():
    parser = argparse.ArgumentParser(prog="sdrenet", description=__doc__.splitlines()[0])
    sub = parser.add_subparsers(dest="command", required=True)
    for name, fn in COMMANDS.items():
        p = sub.add_parser(name, help=fn.__name__.replace("cmd_", "") + " stage")
        p.add_argument("--config", help="YAML config file or preset name (test1_value, test2_direct, ...)")
        p.add_argument("--seed", type=int, help="override training.seed")
        p.add_argument("--out", help="run directory (overrides paths.run_dir)")
        p.add_argument("--threads", type=int, default=1, help="worker threads for SDRE solves and simulations")
        p.add_argument("--set", action="append", default=[], metavar="KEY=VALUE",
                       help="override a config field, e.g. training.epochs=5")
        p.add_argument("-v", "--verbose", action="store_true")
    return parser


def main(argv=None):
    args = build_parser().parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING,
                        format="%(levelname)s %(name)s: %(message)s")
    overrides = list(args.set)
    if args.seed is not None:
        overrides.append(f"training.seed={args.seed}")
    if args.out is not None:
        overrides.append(f"paths.run_dir={json.dumps(args.out)}")
    try:
        if args.threads < 1:
            raise InvalidConfig("--threads must be >= 1")
        cfg = load_config(args.config, overrides)
        COMMANDS[args.command](cfg, threads=args.threads)
    except InvalidConfig as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except (FormatError, OSError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_IO
    except NonFiniteLoss as exc:
        where = f" (epoch {exc.epoch})" if getattr(exc, "epoch", None) else ""
        print(f"error: {exc}{where}", file=sys.stderr)
        return EXIT_NUMERIC
    except (SdreNetError, ValueError) as exc:
        print(f"error: {type(exc).__name__}: {exc}", file=sys.stderr)
        return EXIT_NUMERIC if isinstance(exc, SdreNetError) else EXIT_CONFIG
    return EXIT_OK


if __name__ == "__main__":
    sys.exit(main())
