"""Command-line front end: JSON config in, CSV/JSON artifacts out.

Subcommands
-----------
simulate     draw an SFBM batch, write per-point summary stats and maxima
constants    run a constant-estimation ladder, write the estimate document
validate     compare an empirical excursion curve against the tail formula
consistency  algebraic N=1 disc/arc identity sweep

Every run writes ``provenance.json`` (config hash, seed, versions, backend)
next to its outputs; reruns with identical provenance are byte-identical.
Exit codes: 0 success, 2 configuration error, 3 resource limit, 4 numerical
diagnostic failure.
"""

from __future__ import annotations

import argparse
import hashlib
import json
import sys
from math import pi
from pathlib import Path

import numpy as np

from . import __version__, asymptotics, engine, rng
from . import constants as cst
from . import experiments as xp
from . import model as mdl
from .geometry import DomainError

SCHEMA_VERSION = 1

EXIT_OK = 0
EXIT_CONFIG = 2
EXIT_RESOURCE = 3
EXIT_DIAGNOSTIC = 4


class ConfigError(ValueError):
    """Bad or missing configuration field."""


# ---------------------------------------------------------------------------
# presets: small, documented starting points (override any field via --config)

PRESETS = {
    "pickands-h05-n1": {
        "command": "constants",
        "kind": "pickands", "H": 0.5, "N": 1,
        "ladder": [2, 4, 8], "steps": [0.25, 0.125, 0.0625],
        "replications": [300000, 600000, 1200000],
    },
    "pickands-h1-n1": {
        "command": "constants",
        "kind": "pickands", "H": 1.0, "N": 1,
        "ladder": [0.75, 1.0, 1.25, 1.5], "steps": [0.25, 0.125, 0.0625],
        "replications": [200000, 300000, 500000, 1000000],
    },
    "piterbarg-n1-abs": {
        "command": "constants",
        "kind": "piterbarg", "H": 0.5, "N": 1,
        "drift": {"form": "norm_power", "b": 1.0, "eta": 1.0},
        "ladder": [2, 4, 8], "steps": [0.25, 0.125, 0.0625],
        "replications": [300000, 300000, 600000],
    },
    "mhat-n1-abs": {
        "command": "constants",
        "kind": "M_hat", "H": 0.5, "N": 1,
        "drift": {"form": "first_coord_power", "b": 1.0, "gamma": 1.0},
        "ladder": [2, 4, 8], "steps": [0.25, 0.125, 0.0625],
        "replications": [300000, 300000, 600000],
    },
    "circle-beta05": {
        "command": "validate",
        "model": {"N": 1, "beta": 0.5, "domain": "full_sphere"},
        "grid": {"points": 2048},
        "replications": 1000000,
        "u": {"min": 1.5, "max": 6.0, "step": 0.5, "auto_window": True},
        "constant": {"estimate_preset": "piterbarg-n1-abs"},
    },
    "arc-beta05": {
        "command": "validate",
        "model": {"N": 1, "beta": 0.5, "domain": "geodesic_disc", "a": 1.0},
        "grid": {"points": 512},
        "replications": 1000000,
        "u": {"min": 1.0, "max": 4.5, "step": 0.5, "auto_window": True},
        "constant": {"estimate_preset": "mhat-n1-abs"},
    },
}


# ---------------------------------------------------------------------------
# config plumbing


def _load_config(args) -> dict:
    cfg = {}
    if args.preset:
        if args.preset not in PRESETS:
            raise ConfigError(
                f"unknown preset {args.preset!r}; available: {sorted(PRESETS)}"
            )
        cfg.update(json.loads(json.dumps(PRESETS[args.preset])))
    if args.config:
        path = Path(args.config)
        if not path.exists():
            raise ConfigError(f"config file not found: {path}")
        try:
            loaded = json.loads(path.read_text())
        except json.JSONDecodeError as e:
            raise ConfigError(f"config is not valid JSON: {e}") from e
        if not isinstance(loaded, dict):
            raise ConfigError("config must be a JSON object")
        cfg.update(loaded)
    if not cfg:
        raise ConfigError("provide --config PATH and/or --preset NAME")
    ver = cfg.get("schema_version", SCHEMA_VERSION)
    if ver != SCHEMA_VERSION:
        raise ConfigError(f"unsupported schema_version {ver}")
    if args.seed is not None:
        cfg["seed"] = args.seed
    cfg.setdefault("seed", 0)
    return cfg


def _require(cfg, key, types, what=""):
    if key not in cfg:
        raise ConfigError(f"missing config field '{key}' {what}")
    v = cfg[key]
    if not isinstance(v, types):
        raise ConfigError(f"config field '{key}' has wrong type ({type(v).__name__})")
    return v


def _positive_int(cfg, key):
    v = _require(cfg, key, (int,))
    if isinstance(v, bool) or v < 1:
        raise ConfigError(f"config field '{key}' must be a positive integer")
    return v


def _canonical_json(doc) -> str:
    return json.dumps(doc, sort_keys=True, separators=(",", ":"))


def _provenance(cfg, command, workers) -> dict:
    import scipy

    return {
        "schema_version": SCHEMA_VERSION,
        "command": command,
        "config_sha256": hashlib.sha256(_canonical_json(cfg).encode()).hexdigest(),
        "config": cfg,
        "seed": cfg["seed"],
        "workers": workers,
        "rng_backend": rng.active_backend(),
        "versions": {
            "sfbm_extremes": __version__,
            "numpy": np.__version__,
            "scipy": scipy.__version__,
            "python": "%d.%d" % sys.version_info[:2],
        },
    }


def _write_outputs(out_dir: Path, files: dict):
    # all content is built before anything is written: no partial output sets
    out_dir.mkdir(parents=True, exist_ok=True)
    for name, content in files.items():
        (out_dir / name).write_text(content)


def _csv(rows, columns) -> str:
    lines = [",".join(columns)]
    for row in rows:
        lines.append(",".join(_cell(row[c]) for c in columns))
    return "\n".join(lines) + "\n"


def _cell(v):
    if isinstance(v, float):
        return repr(v)
    return str(v)


# ---------------------------------------------------------------------------
# model / grid / formula assembly


def _build_model_domain(cfg):
    mcfg = _require(cfg, "model", (dict,))
    n = _positive_int(mcfg, "N")
    beta = _require(mcfg, "beta", (int, float))
    dom_name = _require(mcfg, "domain", (str,))
    try:
        if dom_name == "full_sphere":
            model = mdl.sphere_model(n, float(beta))
            domain = xp.FullSphere(n)
        elif dom_name == "geodesic_disc":
            a = float(_require(mcfg, "a", (int, float), "for geodesic_disc"))
            model = mdl.disc_model(n, float(beta))
            domain = xp.GeodesicDisc(n, a)
        else:
            raise ConfigError(f"unknown domain {dom_name!r}")
    except DomainError as e:
        raise ConfigError(str(e)) from e
    return model, domain


def _build_grid(cfg, domain):
    gcfg = _require(cfg, "grid", (dict,))
    if "resolution" in gcfg:
        res = float(gcfg["resolution"])
    elif "points" in gcfg:
        k = _positive_int(gcfg, "points")
        if isinstance(domain, xp.FullSphere) and domain.n == 1:
            res = 2.0 * pi / k
        elif isinstance(domain, xp.GeodesicDisc) and domain.n == 1:
            res = domain.a / (k / 2.0)
        else:
            raise ConfigError("'points' shorthand is only defined for N=1 grids")
    else:
        raise ConfigError("grid needs 'resolution' or 'points'")
    return xp.design_grid(domain, res)


def _u_grid(cfg):
    ucfg = _require(cfg, "u", (dict, list))
    if isinstance(ucfg, list):
        u = [float(v) for v in ucfg]
        auto = False
    else:
        lo = float(_require(ucfg, "min", (int, float)))
        hi = float(_require(ucfg, "max", (int, float)))
        step = float(_require(ucfg, "step", (int, float)))
        if step <= 0 or hi <= lo:
            raise ConfigError("u grid must have positive step and max > min")
        u = list(np.arange(lo, hi + 1e-12, step))
        auto = bool(ucfg.get("auto_window", False))
    if len(u) < 1 or any(b <= a for a, b in zip(u, u[1:])):
        raise ConfigError("u values must be strictly increasing")
    return u, auto


def _drift_from_config(dcfg) -> cst.DriftSpec:
    form = _require(dcfg, "form", (str,))
    try:
        if form == "norm_power":
            return cst.drift_norm_power(dcfg["b"], dcfg["eta"])
        if form == "first_coord_power":
            return cst.drift_first_coord(dcfg["b"], dcfg["gamma"])
        if form == "disc_form":
            return cst.drift_disc_form(dcfg["c1"], dcfg["h"], dcfg["gamma"], dcfg["beta"])
        if form == "quadratic_form_power":
            return cst.drift_quadratic_form(dcfg["a_matrix"], dcfg["c_matrix"], dcfg["eta"])
    except KeyError as e:
        raise ConfigError(f"drift form {form!r} misses parameter {e}") from e
    raise ConfigError(f"unknown drift form {form!r}")


def _resolve_constant(cfg, workers):
    ccfg = _require(cfg, "constant", (dict,))
    if "path" in ccfg:
        doc = json.loads(Path(ccfg["path"]).read_text())
        return cst.estimate_from_json_dict(doc)
    if "value" in ccfg:
        kind = _require(ccfg, "kind", (str,))
        return type("InlineConstant", (), {"value": float(ccfg["value"]), "kind": kind})()
    if "estimate_preset" in ccfg:
        sub = json.loads(json.dumps(PRESETS[ccfg["estimate_preset"]]))
        sub["seed"] = cfg["seed"] + 1
        return _run_constant_estimate(sub, workers)
    if "estimate" in ccfg:
        sub = dict(ccfg["estimate"])
        sub.setdefault("seed", cfg["seed"] + 1)
        return _run_constant_estimate(sub, workers)
    raise ConfigError("constant needs 'path', 'value', 'estimate' or 'estimate_preset'")


def _run_constant_estimate(sub_cfg, workers) -> cst.ConstantEstimate:
    kind = _require(sub_cfg, "kind", (str,))
    h_index = float(_require(sub_cfg, "H", (int, float)))
    n = _positive_int(sub_cfg, "N")
    ladder = sub_cfg.get("ladder")
    steps = sub_cfg.get("steps")
    reps = sub_cfg.get("replications")
    seed = int(sub_cfg.get("seed", 0))
    drift = _drift_from_config(sub_cfg["drift"]) if "drift" in sub_cfg else None
    if kind == "pickands":
        return cst.estimate_pickands(h_index, n, ladder, steps, reps, seed, workers)
    if kind == "piterbarg":
        if drift is None:
            raise ConfigError("piterbarg estimation needs a drift block")
        return cst.estimate_piterbarg(h_index, n, drift, ladder, steps, reps, seed, workers)
    if kind == "M":
        return cst.estimate_M(h_index, n, drift, ladder, steps, reps, seed, workers)
    if kind == "M_hat":
        return cst.estimate_M_hat(h_index, n, drift, ladder, steps, reps, seed, workers)
    raise ConfigError(f"unknown constant kind {kind!r}")


def _formula_for(model, domain, constant):
    if isinstance(domain, xp.FullSphere):
        return asymptotics.sphere_asymptotic(domain.n, model.beta, constant)
    return asymptotics.disc_asymptotic(domain.n, model.beta, domain.a, constant)


# ---------------------------------------------------------------------------
# subcommands


def cmd_simulate(cfg, out_dir: Path, workers: int) -> int:
    model, domain = _build_model_domain(cfg)
    grid = _build_grid(cfg, domain)
    reps = _positive_int(cfg, "replications")
    sampler = engine.build_sfbm_sampler(model, grid.points, cfg["seed"])

    # sequential streaming: summary accumulation order is part of the output
    # contract (byte-identical reruns), so simulate ignores --workers
    maxima = np.empty(reps)
    sums = np.zeros(sampler.npoints)
    sumsq = np.zeros(sampler.npoints)
    for rep0, vals in engine.iter_chunks(sampler, reps):
        maxima[rep0:rep0 + vals.shape[0]] = vals.max(axis=1)
        sums += vals.sum(axis=0)
        sumsq += (vals * vals).sum(axis=0)
    mean = sums / reps
    sd = np.sqrt(np.maximum(sumsq / reps - mean**2, 0.0))
    model_sd = np.sqrt(np.array(
        [mdl.variogram(model, _point(p), model.origin) for p in grid.points]
    ))
    summary_rows = [
        {"point": i, "sample_mean": float(mean[i]), "sample_sd": float(sd[i]),
         "model_sd": float(model_sd[i])}
        for i in range(sampler.npoints)
    ]
    files = {
        "summary.csv": _csv(summary_rows, ["point", "sample_mean", "sample_sd", "model_sd"]),
        "provenance.json": json.dumps(_provenance(cfg, "simulate", workers),
                                      sort_keys=True, indent=2) + "\n",
    }
    if cfg.get("write_maxima", True):
        files["maxima.csv"] = _csv(
            ({"replication": i, "maximum": float(m)} for i, m in enumerate(maxima)),
            ["replication", "maximum"],
        )
    _write_outputs(out_dir, files)
    print(f"simulate: {reps} replications on {sampler.npoints} points "
          f"(jitter {sampler.jitter_used:g}, recon {sampler.reconstruction_error:.2e})")
    return EXIT_OK


def _point(row):
    from .geometry import SpherePoint

    return SpherePoint(tuple(row))


def cmd_constants(cfg, out_dir: Path, workers: int) -> int:
    sub = dict(cfg)
    try:
        est = _run_constant_estimate(sub, workers)
    except (cst.UnstableLimitError, cst.DivergentConstantError) as e:
        # still write the diagnostic ladder, then fail with the numeric code
        doc = {
            "error": str(e),
            "kind": cfg.get("kind"),
            "ladder": [
                {"S": r.S, "S1": r.S1, "grid_step": r.grid_step,
                 "raw_value": r.raw_value, "standard_error": r.standard_error}
                for r in getattr(e, "ladder", ())
            ],
            "per_S_extrapolated": [list(t) for t in getattr(e, "per_s", ())],
        }
        _write_outputs(out_dir, {
            "constant.json": json.dumps(doc, sort_keys=True, indent=2) + "\n",
            "provenance.json": json.dumps(_provenance(cfg, "constants", workers),
                                          sort_keys=True, indent=2) + "\n",
        })
        print(f"constants: ladder diagnostic failure: {e}", file=sys.stderr)
        return EXIT_DIAGNOSTIC
    _write_outputs(out_dir, {
        "constant.json": est.to_json(indent=2) + "\n",
        "provenance.json": json.dumps(_provenance(cfg, "constants", workers),
                                      sort_keys=True, indent=2) + "\n",
    })
    print(f"{est.kind} estimate: {est.value:.6f} +- {est.standard_error:.6f} "
          f"(extrapolation residual {est.extrapolation_residual:.3g})")
    print(f"{'S':>8} {'S1':>8} {'step':>8} {'raw':>12} {'se':>10}")
    for r in est.ladder:
        print(f"{r.S:8.3f} {r.S1:8.3f} {r.grid_step:8.4f} "
              f"{r.raw_value:12.6f} {r.standard_error:10.6f}")
    return EXIT_OK


def cmd_validate(cfg, out_dir: Path, workers: int) -> int:
    model, domain = _build_model_domain(cfg)
    constant = _resolve_constant(cfg, workers)
    formula = _formula_for(model, domain, constant)  # regime mismatch -> exit 2

    u, auto = _u_grid(cfg)
    if cfg.get("asymptotics_only", False):
        rows = [{"u": float(x), "asym": float(formula.value_at(x))} for x in u]
        _write_outputs(out_dir, {
            "asymptotics.csv": _csv(rows, ["u", "asym"]),
            "provenance.json": json.dumps(_provenance(cfg, "validate", workers),
                                          sort_keys=True, indent=2) + "\n",
        })
        print(f"asymptotics-only: {len(rows)} levels written")
        return EXIT_OK

    grid = _build_grid(cfg, domain)
    reps = _positive_int(cfg, "replications")
    if auto:
        u = xp.usable_u_window(grid.mesh, model.beta, reps, formula, u)
        if not u:
            raise engine.ResourceError(
                "no usable u levels for this grid/replication budget; refine "
                "the grid or raise replications"
            )
    curve = xp.estimate_excursion(model, grid, u, reps, cfg["seed"], workers=workers)
    report = xp.validate_ratio(curve, formula)
    files = {
        "ratio.csv": _csv(report.csv_rows(), ["u", "p_hat", "se", "asym",
                                              "ratio", "ci_lo", "ci_hi"]),
        "ratio.json": json.dumps(report.to_json_dict(), sort_keys=True, indent=2) + "\n",
        "provenance.json": json.dumps(_provenance(cfg, "validate", workers),
                                      sort_keys=True, indent=2) + "\n",
    }
    _write_outputs(out_dir, files)
    for w in curve.warnings:
        print(f"warning: {w}", file=sys.stderr)
    i = len(report.u_values) - 1
    print(f"largest usable u = {report.u_values[i]:g}: ratio = {report.ratios[i]:.4f} "
          f"(CI [{report.ci_lo[i]:.4f}, {report.ci_hi[i]:.4f}]), "
          f"trend slope vs 1/u = {report.slope_vs_inv_u:.4f}, "
          f"|ratio-1| increase p = {report.abs_dev_increase_pvalue:.3f}")
    return EXIT_OK


def cmd_consistency(cfg, out_dir: Path, workers: int) -> int:
    pairs = int(cfg.get("pairs", 100))
    seed = cfg["seed"]
    gen = np.random.default_rng(seed)
    worst = 0.0
    for _ in range(pairs):
        beta = float(gen.uniform(0.05, 0.499))
        a = float(gen.uniform(0.05, pi - 0.05))
        worst = max(worst, xp.consistency_N1(beta, a))
    worst = max(worst, xp.consistency_N1(0.5, 1.0), xp.consistency_N1(0.5, pi / 2))
    doc = {"pairs": pairs, "seed": seed, "max_discrepancy": worst, "tolerance": 1e-10}
    _write_outputs(out_dir, {
        "consistency.json": json.dumps(doc, sort_keys=True, indent=2) + "\n",
        "provenance.json": json.dumps(_provenance(cfg, "consistency", workers),
                                      sort_keys=True, indent=2) + "\n",
    })
    print(f"consistency: max discrepancy {worst:.3e} over {pairs} pairs "
          f"(tolerance 1e-10)")
    return EXIT_OK if worst <= 1e-10 else EXIT_DIAGNOSTIC


# ---------------------------------------------------------------------------
# entry point


def _parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(
        prog="sfbm-extremes",
        description="Simulation and tail-asymptotics toolkit for spherical "
                    "fractional Brownian motion",
    )
    sub = p.add_subparsers(dest="command", required=True)
    for name, fn in COMMANDS.items():
        q = sub.add_parser(name, help=fn.__doc__)
        q.add_argument("--config", help="path to a JSON config document")
        q.add_argument("--preset", help=f"named preset ({', '.join(sorted(PRESETS))})")
        q.add_argument("--seed", type=int, default=None, help="64-bit master seed")
        q.add_argument("--workers", type=int, default=1,
                       help="worker threads (never changes results)")
        q.add_argument("--out", default=".", help="output directory")
    return p


COMMANDS = {
    "simulate": cmd_simulate,
    "constants": cmd_constants,
    "validate": cmd_validate,
    "consistency": cmd_consistency,
}


def main(argv=None) -> int:
    args = _parser().parse_args(argv)
    try:
        cfg = _load_config(args)
        preset_cmd = cfg.pop("command", args.command)
        if preset_cmd != args.command:
            raise ConfigError(
                f"config is for command {preset_cmd!r}, invoked as {args.command!r}"
            )
        if args.workers < 1:
            raise ConfigError("--workers must be >= 1")
        code = COMMANDS[args.command](cfg, Path(args.out), args.workers)
    except (ConfigError, asymptotics.ConfigurationError, DomainError, KeyError) as e:
        print(f"config error: {e}", file=sys.stderr)
        return EXIT_CONFIG
    except engine.ResourceError as e:
        print(f"resource error: {e}", file=sys.stderr)
        return EXIT_RESOURCE
    except (cst.UnstableLimitError, cst.DivergentConstantError,
            xp.BoundNotApplicableError, engine.SingularCovarianceError) as e:
        print(f"numerical diagnostic failure: {e}", file=sys.stderr)
        return EXIT_DIAGNOSTIC
    return code


if __name__ == "__main__":
    sys.exit(main())
