"""File formats, serialization, and the command line interface.

JSON for system specs, models, and reports (schema-versioned, diffable);
CSV for time series.  Floats serialize via repr, which round-trips exactly.
Exit codes: 0 ok, 2 parse/usage error, 3 data error, 4 numeric failure.
"""

from __future__ import annotations

import argparse
import concurrent.futures
import datetime
import json
import os
import sys

import numpy as np

from . import plots
from .errors import (
    DivergedError,
    LodegpError,
    NotPositiveDefiniteError,
    ParseError,
    UnknownSystemError,
)
from .gp import (
    Dataset,
    LodeGPModel,
    eig_count,
    gram,
    init_model,
    marginalize,
    neg_mll,
    posterior,
    posterior_mean,
    sample,
    transform,
)
from .kernelalg import compile_lodegp, diagonal_se_kernel, kernel_to_str
from .opalgebra import parse_matrix, poly_to_str
from .smith import smith_normal_form, verify_snf
from .systems import SYSTEM_NAMES, SystemSpec, generate_data, make_system
from .train import TrainConfig, fit
from .verify import ode_residual, rmse

SCHEMA_VERSION = 1
EXIT_OK = 0
EXIT_PARSE = 2
EXIT_DATA = 3
EXIT_NUMERIC = 4


class DataFormatError(LodegpError):
    """CSV or channel-layout problem (exit code 3)."""


# ---------------------------------------------------------------------------
# system spec files
# ---------------------------------------------------------------------------

def system_to_json_dict(spec: SystemSpec) -> dict:
    return {
        "schema": SCHEMA_VERSION,
        "name": spec.name,
        "parameters": list(spec.param_symbols),
        "channels": list(spec.channels),
        "equations": [list(row) for row in spec.equations],
        "train_interval": list(spec.train_interval),
        "eval_interval": list(spec.eval_interval),
        "noise_std": spec.noise_std,
        "param_defaults": dict(spec.param_defaults),
        "param_init": dict(spec.param_init),
    }


def system_from_json_dict(doc: dict) -> SystemSpec:
    for field in ("name", "channels", "equations"):
        if field not in doc:
            raise ParseError(f"system spec is missing the {field!r} field")
    params = tuple(doc.get("parameters", ()))
    equations = doc["equations"]
    if not equations or any(len(r) != len(equations[0]) for r in equations):
        raise ParseError("equations must form a nonempty rectangular grid")
    matrix = parse_matrix(equations, symbols=params)
    channels = tuple(doc["channels"])
    if matrix.cols != len(channels):
        raise ParseError(
            f"equations have {matrix.cols} columns but {len(channels)} channels are declared"
        )
    defaults = {k: float(v) for k, v in doc.get("param_defaults", {}).items()}
    init = {k: float(v) for k, v in doc.get("param_init", {}).items()}
    ref = None
    name = doc["name"]
    if name in SYSTEM_NAMES:
        builtin = make_system(name)
        if builtin.matrix == matrix and builtin.channels == channels:
            ref = builtin.ref_solution
    return SystemSpec(
        name=name,
        channels=channels,
        param_symbols=params,
        param_defaults=defaults,
        param_init={s: init.get(s, 1.0) for s in params},
        matrix=matrix,
        ref_solution=ref,
        train_interval=tuple(doc.get("train_interval", (0.0, 1.0))),
        eval_interval=tuple(doc.get("eval_interval", (0.0, 1.0))),
        noise_std=float(doc.get("noise_std", 0.0)),
        equations=tuple(tuple(r) for r in equations),
    )


def load_system(path: str) -> SystemSpec:
    if path in SYSTEM_NAMES:
        return make_system(path)
    with open(path) as fh:
        try:
            doc = json.load(fh)
        except json.JSONDecodeError as exc:
            raise ParseError(f"invalid JSON in {path}: {exc}") from exc
    return system_from_json_dict(doc)


# ---------------------------------------------------------------------------
# CSV time series
# ---------------------------------------------------------------------------

def write_dataset_csv(path, dataset: Dataset):
    header = "t," + ",".join(dataset.channels)
    lines = [header]
    for t, row in zip(dataset.times, dataset.values):
        lines.append(",".join([repr(float(t))] + [repr(float(v)) for v in row]))
    _atomic_write(path, "\n".join(lines) + "\n")


def read_dataset_csv(path, channels) -> Dataset:
    with open(path) as fh:
        lines = [ln.strip() for ln in fh if ln.strip()]
    if not lines:
        raise DataFormatError(f"{path} is empty")
    header = [h.strip() for h in lines[0].split(",")]
    expected = ["t"] + list(channels)
    if header != expected:
        raise DataFormatError(
            f"{path} header {header} does not match expected {expected}"
        )
    rows = []
    for ln in lines[1:]:
        parts = ln.split(",")
        if len(parts) != len(expected):
            raise DataFormatError(f"row with {len(parts)} fields, expected {len(expected)}")
        try:
            rows.append([float(x) for x in parts])
        except ValueError as exc:
            raise DataFormatError(f"non-numeric value in {path}: {exc}") from exc
    if not rows:
        raise DataFormatError(f"{path} has a header but no data rows")
    arr = np.array(rows)
    return Dataset(times=arr[:, 0], values=arr[:, 1:], channels=tuple(channels))


# ---------------------------------------------------------------------------
# model files
# ---------------------------------------------------------------------------

def model_to_json_dict(model: LodeGPModel, spec: SystemSpec, data: Dataset, mode: str,
                       kind: str = "lodegp") -> dict:
    return {
        "schema": SCHEMA_VERSION,
        "system": system_to_json_dict(spec),
        "mode": mode,
        "model_kind": kind,
        "raw_hypers": {k: float(v) for k, v in sorted(model.raw_hypers.items())},
        "noise_raw": float(model.noise_raw),
        "ode_params": {k: float(v) for k, v in sorted(model.ode_params.items())},
        "data": {
            "times": [float(t) for t in data.times],
            "values": [[float(v) for v in row] for row in data.values],
            "channels": list(data.channels),
        },
    }


def model_from_json_dict(doc: dict):
    spec = system_from_json_dict(doc["system"])
    mode = doc.get("mode", "symbolic")
    kind = doc.get("model_kind", "lodegp")
    if kind == "baseline_se":
        kernel = diagonal_se_kernel(spec.channels)
    else:
        kernel = compile_lodegp(spec, mode=mode)
    model = LodeGPModel(
        kernel=kernel,
        raw_hypers={k: float(v) for k, v in doc["raw_hypers"].items()},
        ode_params={k: float(v) for k, v in doc.get("ode_params", {}).items()},
        noise_raw=float(doc["noise_raw"]),
    )
    d = doc["data"]
    data = Dataset(np.array(d["times"]), np.array(d["values"]), tuple(d["channels"]))
    return model, spec, data, mode


def load_model(path: str):
    with open(path) as fh:
        try:
            doc = json.load(fh)
        except json.JSONDecodeError as exc:
            raise ParseError(f"invalid JSON in {path}: {exc}") from exc
    return model_from_json_dict(doc)


# ---------------------------------------------------------------------------
# shared helpers
# ---------------------------------------------------------------------------

def _atomic_write(path, text: str):
    path = str(path)
    tmp = path + ".tmp"
    with open(tmp, "w") as fh:
        fh.write(text)
    os.replace(tmp, path)


def dump_json(doc, path=None):
    text = json.dumps(doc, indent=2, sort_keys=True) + "\n"
    if path:
        _atomic_write(path, text)
    else:
        sys.stdout.write(text)


def _timestamp() -> str:
    return datetime.datetime.now(datetime.timezone.utc).isoformat()


def _parse_grid(text: str) -> np.ndarray:
    try:
        a, b, n = text.split(":")
        a, b, n = float(a), float(b), int(n)
    except ValueError as exc:
        raise ParseError(f"grid must be 'start:stop:count', got {text!r}") from exc
    if n < 1 or not b > a:
        raise ParseError(f"invalid grid {text!r}")
    return np.linspace(a, b, n)


def _parse_assignments(text: str) -> dict:
    out = {}
    if not text:
        return out
    for piece in text.split(","):
        if "=" not in piece:
            raise ParseError(f"expected name=value, got {piece!r}")
        k, v = piece.split("=", 1)
        out[k.strip()] = float(v)
    return out


def _loss_trace_summary(trace) -> dict:
    return {
        "first": trace[0],
        "last": trace[-1],
        "min": min(trace),
        "argmin": int(np.argmin(trace)),
        "iters": len(trace),
    }


def compute_metrics(model, spec: SystemSpec, data: Dataset, eig_points: int = 200) -> dict:
    """The benchmark metric set for one fitted model."""
    metrics = {}
    metrics["loss"] = neg_mll(model, data)
    metrics["loss_per_scalar"] = metrics["loss"] / len(spec.channels)
    report = ode_residual(
        lambda ts: posterior_mean(model, data, ts),
        spec,
        spec.eval_interval,
        params=spec.param_defaults,
    )
    metrics.update(report.as_dict())
    if spec.ref_solution is not None:
        train_pred = posterior_mean(model, data, data.times)
        metrics["train_rmse"] = rmse(train_pred, spec.ref_solution(data.times))
        eval_grid = np.linspace(*spec.eval_interval, 1000)
        eval_pred = posterior_mean(model, data, eval_grid)
        metrics["eval_rmse"] = rmse(eval_pred, spec.ref_solution(eval_grid))
    else:
        train_pred = posterior_mean(model, data, data.times)
        metrics["train_rmse"] = rmse(train_pred, data.values)
        metrics["eval_rmse"] = None
    grid = np.linspace(*spec.eval_interval, eig_points)
    metrics["eig_count"] = eig_count(model, grid, 1e-6)
    metrics["eig_grid_points"] = eig_points
    return metrics


def build_result_dict(system_name, config: TrainConfig, result, spec, data,
                      eig_points: int = 200, model_kind: str = "lodegp") -> dict:
    model = result.model
    return {
        "schema": SCHEMA_VERSION,
        "system": system_name,
        "model_kind": model_kind,
        "seed": config.seed,
        "config": {
            "iters": config.iters,
            "lr": config.lr,
            "init_range": list(config.init_range),
            "grad_step": config.grad_step,
            "mode": config.mode,
        },
        "params": {
            name: {"raw": raw, "transformed": tf}
            for name, (raw, tf) in sorted(result.final_params.items())
        },
        "ode_params": {k: float(v) for k, v in sorted(model.ode_params.items())},
        "loss_trace_summary": _loss_trace_summary(result.loss_trace),
        "metrics": compute_metrics(model, spec, data, eig_points=eig_points),
    }


# ---------------------------------------------------------------------------
# subcommands
# ---------------------------------------------------------------------------

def cmd_snf(args) -> int:
    spec = load_system(args.system)
    snf = smith_normal_form(spec.matrix)
    assert verify_snf(spec.matrix, snf)
    from .smith import is_controllable

    controllable = is_controllable(snf.D)
    if args.json:
        doc = {
            "schema": SCHEMA_VERSION,
            "system": spec.name,
            "U": [[poly_to_str(e) for e in row] for row in snf.U.entries],
            "D": [[poly_to_str(e) for e in row] for row in snf.D.entries],
            "V": [[poly_to_str(e) for e in row] for row in snf.V.entries],
            "controllable": controllable,
        }
        dump_json(doc, args.output)
        return EXIT_OK

    def show(name, mat):
        print(f"{name} =")
        cells = [[poly_to_str(e) for e in row] for row in mat.entries]
        width = max(len(c) for row in cells for c in row)
        for row in cells:
            print("  [ " + " | ".join(c.rjust(width) for c in row) + " ]")

    show("U", snf.U)
    show("A", spec.matrix)
    show("V", snf.V)
    show("D", snf.D)
    print(f"controllable: {'true' if controllable else 'false'}")
    return EXIT_OK


def cmd_kernel(args) -> int:
    spec = load_system(args.system)
    kernel = compile_lodegp(spec, mode=args.mode)
    params = _parse_assignments(args.params or "")
    if args.mode == "refactorize":
        binding = {s: params.get(s, 1.0) for s in kernel.param_symbols}
        kernel = kernel.bind(binding)
    n = kernel.dim
    entries = [(args.entry[0], args.entry[1])] if args.entry else [
        (i, j) for i in range(n) for j in range(n)
    ]
    print(f"system: {spec.name}   channels: {', '.join(spec.channels)}")
    print(f"hyperparameter slots: {', '.join(s for s, _ in kernel.hyper_slots) or '(none)'}")
    for i, j in entries:
        print(f"K[{i},{j}] ({spec.channels[i]},{spec.channels[j]}):")
        print(f"  {kernel_to_str(kernel.entry(i, j))}")
    return EXIT_OK


def cmd_fit(args) -> int:
    spec = load_system(args.system)
    data = read_dataset_csv(args.data, spec.channels)
    config = TrainConfig(iters=args.iters, lr=args.lr, seed=args.seed, mode=args.mode)
    result = fit(spec, data, config)
    doc = build_result_dict(spec.name, config, result, spec, data,
                            eig_points=args.eig_points)
    doc["created_at"] = _timestamp()
    if args.output:
        model_doc = model_to_json_dict(result.model, spec, data, args.mode)
        model_doc["created_at"] = doc["created_at"]
        dump_json(model_doc, args.output)
    dump_json(doc, args.result)
    return EXIT_OK


def cmd_predict(args) -> int:
    model, spec, data, _ = load_model(args.model)
    grid = _parse_grid(args.grid)
    post = posterior(model, data, grid)
    n = len(spec.channels)
    var = np.diagonal(post.covariance).reshape(grid.size, n)
    header = ["t"] + [f"mean_{c}" for c in spec.channels] + [f"var_{c}" for c in spec.channels]
    lines = [",".join(header)]
    for k, t in enumerate(grid):
        row = [repr(float(t))]
        row += [repr(float(v)) for v in post.mean[k]]
        row += [repr(float(v)) for v in var[k]]
        lines.append(",".join(row))
    text = "\n".join(lines) + "\n"
    if args.output:
        _atomic_write(args.output, text)
    else:
        sys.stdout.write(text)
    if args.plot:
        ref = spec.ref_solution(grid) if spec.ref_solution is not None else None
        plots.plot_posterior(args.plot, grid, post.mean, var, data=data, ref=ref,
                             channels=spec.channels, title=f"{spec.name} posterior")
    return EXIT_OK


def cmd_sample(args) -> int:
    model, spec, data, _ = load_model(args.model)
    grid = _parse_grid(args.grid)
    condition = None if args.prior else data
    draws = sample(model, grid, count=args.count, seed=args.seed, condition=condition)
    header = ["t"] + [f"sample{k}_{c}" for k in range(args.count) for c in spec.channels]
    lines = [",".join(header)]
    for idx, t in enumerate(grid):
        row = [repr(float(t))]
        for d in draws:
            row += [repr(float(v)) for v in d[idx]]
        lines.append(",".join(row))
    text = "\n".join(lines) + "\n"
    if args.output:
        _atomic_write(args.output, text)
    else:
        sys.stdout.write(text)
    if args.plot:
        plots.plot_samples(args.plot, grid, draws, channels=spec.channels,
                           title=f"{spec.name} samples")
    return EXIT_OK


def cmd_verify(args) -> int:
    model, model_spec, data, _ = load_model(args.model)
    spec = load_system(args.system) if args.system else model_spec
    interval = tuple(args.interval) if args.interval else spec.eval_interval
    report = ode_residual(
        lambda ts: posterior_mean(model, data, ts),
        spec,
        interval,
        params=spec.param_defaults,
        smoothing=args.smoothing,
    )
    grid = np.linspace(*interval, args.eig_points)
    doc = {
        "schema": SCHEMA_VERSION,
        "system": spec.name,
        "interval": list(interval),
        **report.as_dict(),
        "eig_count": eig_count(model, grid, 1e-6),
        "eig_threshold": 1e-6,
        "eig_grid_points": args.eig_points,
    }
    dump_json(doc, args.output)
    return EXIT_OK


# ---------------------------------------------------------------------------
# experiment runner
# ---------------------------------------------------------------------------

def _median_std(values) -> dict:
    arr = np.array([v for v in values if v is not None], dtype=float)
    if arr.size == 0:
        return {"median": None, "std": None}
    return {"median": float(np.median(arr)), "std": float(np.std(arr))}


def _run_one(spec, noise_on, base_seed, run_index, iters, lr, eig_points):
    noise_std = spec.noise_std if noise_on else 0.0
    data_seed = base_seed + 10000 + run_index
    data = generate_data(spec, 25, spec.train_interval, noise_std, seed=data_seed)
    out = {}
    for kind in ("lodegp", "baseline_se"):
        seed = base_seed + run_index + (500000 if kind == "baseline_se" else 0)
        config = TrainConfig(iters=iters, lr=lr, seed=seed)
        target = spec if kind == "lodegp" else diagonal_se_kernel(spec.channels)
        result = fit(target, data, config)
        doc = build_result_dict(spec.name, config, result, spec, data,
                                eig_points=eig_points, model_kind=kind)
        out[kind] = {"result": doc, "trace": result.loss_trace, "model": result.model}
    return {"run": run_index, "data": data, "models": out}


def _three_tank_marginalization(spec, eig_points) -> dict:
    """Unit-hyperparameter comparison: full five-channel model vs the model
    marginalized to the tank levels (true inputs substituted for residuals)."""
    kernel = compile_lodegp(spec)
    model = init_model(kernel, noise_raw=-30.0)  # sigma = ell = 1, tiny noise
    data = generate_data(spec, 25, spec.train_interval, 0.0, seed=0)
    full = ode_residual(
        lambda ts: posterior_mean(model, data, ts), spec, spec.eval_interval
    )
    marg = marginalize(model, ["f1", "f2", "f3"])
    sub = Dataset(data.times, data.values[:, :3], ("f1", "f2", "f3"))

    def marg_fn(ts):
        m = posterior_mean(marg, sub, ts)
        u = spec.ref_solution(ts)[:, 3:]
        return np.concatenate([m, u], axis=1)

    marg_report = ode_residual(marg_fn, spec, spec.eval_interval)
    return {
        "hyperparameters": "sigma = ell = 1",
        "full": full.as_dict(),
        "marginalized_f_channels": marg_report.as_dict(),
    }


def run_experiment(name, runs=10, noise_on=True, seed=0, out_dir=None,
                   iters=300, lr=0.1, jobs=1, eig_points=200) -> dict:
    """Repeat the train/evaluate protocol and aggregate per-metric
    medians and standard deviations for the LODE-GP and the baseline GP."""
    spec = make_system(name)
    indices = list(range(runs))
    if jobs > 1:
        with concurrent.futures.ThreadPoolExecutor(max_workers=jobs) as pool:
            results = list(
                pool.map(
                    lambda r: _run_one(spec, noise_on, seed, r, iters, lr, eig_points),
                    indices,
                )
            )
    else:
        results = [_run_one(spec, noise_on, seed, r, iters, lr, eig_points) for r in indices]
    results.sort(key=lambda r: r["run"])

    aggregate = {
        "schema": SCHEMA_VERSION,
        "system": name,
        "runs": runs,
        "noise": bool(noise_on),
        "seed": seed,
        "config": {"iters": iters, "lr": lr, "datapoints": 25, "eig_points": eig_points},
        "models": {},
    }
    metric_keys = ("train_rmse", "eval_rmse", "loss", "loss_per_scalar",
                   "mean_ode_error", "eig_count")
    for kind in ("lodegp", "baseline_se"):
        rows = [r["models"][kind]["result"]["metrics"] for r in results]
        agg = {key: _median_std([row[key] for row in rows]) for key in metric_keys}
        agg["per_equation_ode_error_median"] = [
            float(np.median([row["per_equation_ode_error"][e] for row in rows]))
            for e in range(spec.matrix.rows)
        ]
        aggregate["models"][kind] = agg
    if name == "heating":
        errs = []
        for r in results:
            p = r["models"]["lodegp"]["result"]["ode_params"]
            errs.append(
                max(
                    abs(p[s] - spec.param_defaults[s]) / abs(spec.param_defaults[s])
                    for s in spec.param_symbols
                )
            )
        aggregate["parameter_recovery"] = {
            "max_relative_error": float(np.max(errs)),
            "per_run_max_relative_error": [float(e) for e in errs],
        }
    if name == "three-tank":
        aggregate["marginalization_comparison"] = _three_tank_marginalization(
            spec, eig_points
        )
    aggregate["completed_runs"] = len(results)

    if out_dir:
        os.makedirs(out_dir, exist_ok=True)
        for r in results:
            for kind in ("lodegp", "baseline_se"):
                doc = dict(r["models"][kind]["result"])
                dump_json(doc, os.path.join(out_dir, f"run_{r['run']:03d}.{kind}.json"))
                model_doc = model_to_json_dict(
                    r["models"][kind]["model"], spec, r["data"], "symbolic", kind=kind
                )
                dump_json(
                    model_doc,
                    os.path.join(out_dir, f"run_{r['run']:03d}.{kind}.model.json"),
                )
        _write_experiment_csvs(out_dir, spec, results)
        _write_experiment_figures(out_dir, spec, results)
        agg_doc = dict(aggregate)
        agg_doc["created_at"] = _timestamp()
        dump_json(agg_doc, os.path.join(out_dir, "aggregate.json"))
    return aggregate


def _write_experiment_csvs(out_dir, spec, results):
    first = results[0]
    write_dataset_csv(os.path.join(out_dir, "data_run000.csv"), first["data"])
    grid = np.linspace(*spec.eval_interval, 400)
    for kind in ("lodegp", "baseline_se"):
        model = first["models"][kind]["model"]
        post = posterior(model, first["data"], grid)
        var = np.diagonal(post.covariance).reshape(grid.size, -1)
        header = (["t"] + [f"mean_{c}" for c in spec.channels]
                  + [f"var_{c}" for c in spec.channels])
        lines = [",".join(header)]
        for k, t in enumerate(grid):
            row = [repr(float(t))]
            row += [repr(float(v)) for v in post.mean[k]]
            row += [repr(float(v)) for v in var[k]]
            lines.append(",".join(row))
        _atomic_write(os.path.join(out_dir, f"predictions_{kind}_run000.csv"),
                      "\n".join(lines) + "\n")
    lines = ["run,model,equation,error"]
    for r in results:
        for kind in ("lodegp", "baseline_se"):
            per_eq = r["models"][kind]["result"]["metrics"]["per_equation_ode_error"]
            for e, v in enumerate(per_eq):
                lines.append(f"{r['run']},{kind},{e + 1},{v!r}")
    _atomic_write(os.path.join(out_dir, "ode_errors.csv"), "\n".join(lines) + "\n")
    for kind in ("lodegp", "baseline_se"):
        traces = [r["models"][kind]["trace"] for r in results]
        header = "iter," + ",".join(f"run{r['run']}" for r in results)
        lines = [header]
        for i in range(len(traces[0])):
            lines.append(",".join([str(i)] + [repr(tr[i]) for tr in traces]))
        _atomic_write(os.path.join(out_dir, f"loss_traces_{kind}.csv"),
                      "\n".join(lines) + "\n")


def _write_experiment_figures(out_dir, spec, results):
    first = results[0]
    grid = np.linspace(*spec.eval_interval, 400)
    model = first["models"]["lodegp"]["model"]
    post = posterior(model, first["data"], grid)
    var = np.diagonal(post.covariance).reshape(grid.size, -1)
    ref = spec.ref_solution(grid) if spec.ref_solution is not None else None
    plots.plot_posterior(
        os.path.join(out_dir, "posterior_lodegp_run000.png"),
        grid, post.mean, var, data=first["data"], ref=ref, channels=spec.channels,
        title=f"{spec.name}: LODE-GP posterior (run 0)",
    )
    errors = {}
    for kind in ("lodegp", "baseline_se"):
        per_eq = [[] for _ in range(spec.matrix.rows)]
        for r in results:
            for e, v in enumerate(r["models"][kind]["result"]["metrics"]["per_equation_ode_error"]):
                per_eq[e].append(v)
        errors["LODE-GP" if kind == "lodegp" else "GP"] = per_eq
    ref_line = None
    if spec.ref_solution is not None:
        ref_line = ode_residual(spec.ref_solution, spec, spec.eval_interval,
                                params=spec.param_defaults).mean
    plots.plot_ode_error_box(
        os.path.join(out_dir, "ode_error_boxplot.png"), errors,
        reference_line=ref_line, title=f"{spec.name}: ODE error",
    )
    plots.plot_loss_traces(
        os.path.join(out_dir, "loss_traces.png"),
        {kind: [r["models"][kind]["trace"] for r in results]
         for kind in ("lodegp", "baseline_se")},
        title=f"{spec.name}: training loss",
    )


def cmd_experiment(args) -> int:
    jobs = args.jobs
    env_jobs = os.environ.get("LODEGP_JOBS")
    if env_jobs:
        jobs = int(env_jobs)
    aggregate = run_experiment(
        args.name,
        runs=args.runs,
        noise_on=(args.noise == "on"),
        seed=args.seed,
        out_dir=args.output,
        iters=args.iters,
        lr=args.lr,
        jobs=jobs,
        eig_points=args.eig_points,
    )
    if not args.output:
        dump_json(aggregate)
    else:
        print(f"experiment written to {args.output}")
        for kind, agg in aggregate["models"].items():
            print(
                f"  {kind}: mean_ode_error median {agg['mean_ode_error']['median']:.3e}, "
                f"train_rmse median {agg['train_rmse']['median']}"
            )
    return EXIT_OK


# ---------------------------------------------------------------------------
# entry point
# ---------------------------------------------------------------------------

def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="lodegp",
        description="Gaussian processes whose realizations satisfy linear ODE systems",
    )
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("snf", help="Smith normal form of a system's operator matrix")
    p.add_argument("system", help="system JSON file or built-in name")
    p.add_argument("--json", action="store_true", help="machine-readable output")
    p.add_argument("-o", "--output", help="write JSON here instead of stdout")
    p.set_defaults(func=cmd_snf)

    p = sub.add_parser("kernel", help="print the compiled covariance functions")
    p.add_argument("system")
    p.add_argument("--entry", nargs=2, type=int, metavar=("I", "J"))
    p.add_argument("--mode", choices=("symbolic", "refactorize"), default="symbolic")
    p.add_argument("--params", help="comma-separated name=value for refactorize mode")
    p.set_defaults(func=cmd_kernel)

    p = sub.add_parser("fit", help="train on a CSV dataset")
    p.add_argument("system")
    p.add_argument("data", help="CSV with header t,<channels>")
    p.add_argument("--iters", type=int, default=300)
    p.add_argument("--lr", type=float, default=0.1)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--mode", choices=("symbolic", "refactorize"), default="symbolic")
    p.add_argument("--eig-points", type=int, default=200)
    p.add_argument("-o", "--output", help="write the fitted model JSON here")
    p.add_argument("--result", help="write the result JSON here (default stdout)")
    p.set_defaults(func=cmd_fit)

    p = sub.add_parser("predict", help="posterior mean and variance on a grid")
    p.add_argument("model")
    p.add_argument("--grid", required=True, help="start:stop:count")
    p.add_argument("-o", "--output", help="CSV path (default stdout)")
    p.add_argument("--plot", help="also render a figure to this path")
    p.set_defaults(func=cmd_predict)

    p = sub.add_parser("sample", help="draw joint trajectories")
    p.add_argument("model")
    p.add_argument("--grid", required=True)
    p.add_argument("--count", type=int, default=1)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--prior", action="store_true", help="sample the prior instead of the posterior")
    p.add_argument("-o", "--output")
    p.add_argument("--plot")
    p.set_defaults(func=cmd_sample)

    p = sub.add_parser("verify", help="ODE residual and eigenvalue count of a fitted model")
    p.add_argument("model")
    p.add_argument("system", nargs="?", help="system to verify against (default: the model's)")
    p.add_argument("--interval", nargs=2, type=float, metavar=("A", "B"))
    p.add_argument("--smoothing", choices=("none", "ma5"), default="none")
    p.add_argument("--eig-points", type=int, default=1000)
    p.add_argument("-o", "--output")
    p.set_defaults(func=cmd_verify)

    p = sub.add_parser("experiment", help="multi-run benchmark reproduction")
    p.add_argument("name", choices=SYSTEM_NAMES)
    p.add_argument("--runs", type=int, default=10)
    p.add_argument("--noise", choices=("on", "off"), default="on")
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--iters", type=int, default=300)
    p.add_argument("--lr", type=float, default=0.1)
    p.add_argument("--jobs", type=int, default=1)
    p.add_argument("--eig-points", type=int, default=200)
    p.add_argument("-o", "--output", help="output directory")
    p.set_defaults(func=cmd_experiment)

    return parser


def main(argv=None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return EXIT_PARSE if exc.code not in (0, None) else 0
    try:
        return args.func(args)
    except ParseError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_PARSE
    except (DataFormatError,) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_DATA
    except (DivergedError, NotPositiveDefiniteError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        if isinstance(exc, DivergedError) and exc.loss_trace:
            print(f"loss trace tail: {exc.loss_trace[-5:]}", file=sys.stderr)
        return EXIT_NUMERIC
    except UnknownSystemError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_PARSE
    except FileNotFoundError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_PARSE
    except LodegpError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_NUMERIC


if __name__ == "__main__":
    sys.exit(main())
