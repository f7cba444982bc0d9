"""Command-line front end: simulate, estimate-p, unmix, evaluate, pipeline.

Exit codes: 0 success, 1 experiment failure (solver divergence, failed
seeds), 2 usage or configuration error.
"""

from __future__ import annotations

import argparse
import concurrent.futures
import datetime
import json
import os
import platform
import sys

import numpy as np
import scipy

from . import __version__
from .graph import build_knn_graph, build_spatial_graph, laplacian
from .metrics import dump_report, evaluate_factors, format_table
from .scene import ConfigError, SceneConfig, load_scene, save_scene, simulate
from .solvers import (
    DEFAULT_GNMF_LAMBDA,
    SolverDivergence,
    SolverOptions,
    load_factorization,
    options_to_json,
    save_factorization,
    solve,
)
from .spectral_data import FormatError, load_label_map, load_spectral_library
from .subspace import estimate_endmember_count, pca_spectrum

EXIT_OK, EXIT_FAILED, EXIT_USAGE = 0, 1, 2
DATA_DIR = os.path.join(os.path.dirname(__file__), "data")
BUNDLED_LIBRARY = os.path.join(DATA_DIR, "library.csv")
BUNDLED_CONFIG = os.path.join(DATA_DIR, "scene.json")


class UsageError(Exception):
    pass


def _now():
    return datetime.datetime.now(datetime.timezone.utc).isoformat(timespec="seconds")


def write_manifest(out_dir, command, config_path=None, seeds=(), started=None, extra=None):
    doc = {
        "command": command,
        "config_path": config_path,
        "output_dir": os.path.abspath(out_dir),
        "seeds": list(seeds),
        "versions": {
            "graphunmix": __version__,
            "numpy": np.__version__,
            "scipy": scipy.__version__,
            "python": platform.python_version(),
        },
        "started": started or _now(),
        "finished": _now(),
    }
    if extra:
        doc.update(extra)
    os.makedirs(out_dir, exist_ok=True)
    with open(os.path.join(out_dir, "manifest.json"), "w", encoding="utf-8") as fh:
        json.dump(doc, fh, indent=2, sort_keys=True)
        fh.write("\n")


def _write_json(path, doc):
    with open(path, "w", encoding="utf-8") as fh:
        json.dump(doc, fh, indent=2, sort_keys=True)
        fh.write("\n")


# -- stages shared by the single commands and the pipeline ------------------


def read_config(config_path):
    try:
        with open(config_path, encoding="utf-8") as fh:
            doc = json.load(fh)
    except OSError as exc:
        raise ConfigError("config_path", f"cannot read {config_path}: {exc.strerror}") from None
    except json.JSONDecodeError as exc:
        raise ConfigError("config_path", f"invalid JSON: {exc}") from None
    config = SceneConfig.from_json(doc, base_dir=os.path.dirname(os.path.abspath(config_path)))
    if not os.path.isfile(config.label_map_path):
        raise ConfigError("label_map_path", f"file not found: {config.label_map_path}")
    return config


def run_simulation(config, library_path, out_dir):
    try:
        lib = load_spectral_library(library_path)
    except (OSError, ValueError) as exc:
        raise ConfigError("library", str(exc)) from None
    try:
        labels = load_label_map(config.label_map_path)
    except (OSError, ValueError) as exc:
        raise ConfigError("label_map_path", str(exc)) from None
    unknown = [n for n in config.material_names if n not in lib.names]
    if unknown:
        raise ConfigError("material_names", f"not in library: {unknown}")
    try:
        scene = simulate(config, lib, labels)
    except ValueError as exc:
        raise ConfigError("material_names", str(exc)) from None
    save_scene(out_dir, scene, extra={"wavelengths": lib.wavelengths.tolist()})
    return scene


def _load_scene_or_usage(scene_dir):
    try:
        return load_scene(scene_dir)
    except (OSError, ValueError, KeyError) as exc:
        raise UsageError(f"cannot read scene directory {scene_dir}: {exc}") from None


def solver_settings(args):
    """Validate method/graph flags and return ``(lam, graph_spec)``."""
    if args.method == "nmf":
        if args.lam is not None:
            raise UsageError("--lambda is only valid with --method gnmf")
        return 0.0, None
    lam = DEFAULT_GNMF_LAMBDA if args.lam is None else args.lam
    if lam < 0:
        raise UsageError("--lambda must be nonnegative")
    if args.sigma_h is not None and args.weighting != "heat":
        raise UsageError("--sigma-h requires --weighting heat")
    if args.graph != "knn" and args.weighting != "binary":
        raise UsageError("spatial graphs only support binary weighting")
    spec = {"graph": args.graph, "knn_p": args.knn_p, "weighting": args.weighting, "sigma_h": args.sigma_h}
    return lam, spec


def make_graph(spec, X, shape):
    if spec["graph"] == "knn":
        return build_knn_graph(X, spec["knn_p"], spec["weighting"], spec["sigma_h"])
    system = 4 if spec["graph"] == "spatial4" else 8
    return build_spatial_graph(shape[0], shape[1], system)


def run_unmixing(scene, method, lam, graph_spec, p, seed, max_iter, tol, asc, out_dir):
    X = scene.observed
    lap = None
    if method == "gnmf" and lam > 0:
        try:
            lap = laplacian(make_graph(graph_spec, X, scene.shape))
        except ValueError as exc:
            raise UsageError(f"graph construction failed: {exc}") from None
    try:
        opts = SolverOptions(p_endmembers=p, lam=lam, max_iter=max_iter, rel_tol=tol, seed=seed, asc=asc)
    except ValueError as exc:
        raise UsageError(str(exc)) from None
    try:
        fact = solve(X, lap, opts)
    except ValueError as exc:
        raise UsageError(str(exc)) from None
    info = {"method": method, "options": options_to_json(opts)}
    if method == "gnmf":
        info["graph"] = {k: v for k, v in graph_spec.items() if v is not None}
    save_factorization(out_dir, fact, info)
    return fact


def run_label(info, run_dir):
    return info.get("method", os.path.basename(os.path.normpath(run_dir))).upper()


# -- commands ---------------------------------------------------------------


def cmd_simulate(args):
    started = _now()
    config = read_config(args.config)
    scene = run_simulation(config, args.library, args.out)
    write_manifest(args.out, "simulate", args.config, [config.seed], started)
    print(f"scene {scene.shape[0]}x{scene.shape[1]} pixels, {scene.observed.shape[0]} bands, "
          f"P={scene.true_endmembers.shape[1]}, realized SNR {scene.noise_stats.realized_snr_db:.2f} dB")
    return EXIT_OK


def cmd_estimate_p(args):
    started = _now()
    if not os.path.isdir(args.scene_dir):
        raise UsageError(f"scene directory not found: {args.scene_dir}")
    scene = _load_scene_or_usage(args.scene_dir)
    if not 0 < args.threshold <= 1:
        raise UsageError("--threshold must lie in (0, 1]")
    spec = pca_spectrum(scene.observed, args.centered)
    doc = {
        "estimated_p": estimate_endmember_count(scene.observed, args.threshold, args.centered),
        "threshold": args.threshold,
        "centered": args.centered,
        "eigenvalues_head": [float(v) for v in spec.eigenvalues[:10]],
    }
    os.makedirs(args.out, exist_ok=True)
    _write_json(os.path.join(args.out, "estimate.json"), doc)
    write_manifest(args.out, "estimate-p", None, [], started, {"scene_dir": os.path.abspath(args.scene_dir)})
    print(json.dumps(doc, sort_keys=True))
    return EXIT_OK


def _endmember_count(args, scene):
    if args.endmembers is None:
        return scene.true_endmembers.shape[1]
    if args.endmembers == "auto":
        return estimate_endmember_count(scene.observed, args.threshold, args.centered)
    try:
        p = int(args.endmembers)
    except ValueError:
        raise UsageError("--endmembers must be an integer or 'auto'") from None
    if p < 1:
        raise UsageError("--endmembers must be positive")
    return p


def cmd_unmix(args):
    started = _now()
    lam, graph_spec = solver_settings(args)
    scene = _load_scene_or_usage(args.scene_dir)
    p = _endmember_count(args, scene)
    try:
        fact = run_unmixing(scene, args.method, lam, graph_spec, p, args.seed, args.max_iter,
                            args.tol, not args.no_asc, args.out)
    except SolverDivergence as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_FAILED
    write_manifest(args.out, "unmix", None, [args.seed], started, {"scene_dir": os.path.abspath(args.scene_dir)})
    print(f"{args.method}: {fact.iterations_run} iterations, converged={fact.converged}, "
          f"objective {fact.objective_trace[-1] if fact.objective_trace else float('nan'):.6g}")
    return EXIT_OK


def cmd_evaluate(args):
    started = _now()
    scene = _load_scene_or_usage(args.scene_dir)
    runs = []
    for run_dir in args.run_dirs:
        try:
            fact, info = load_factorization(run_dir)
        except (OSError, ValueError) as exc:
            raise UsageError(f"cannot read run directory {run_dir}: {exc}") from None
        runs.append((run_dir, fact, info))
    labels = [run_label(info, d) for d, _, info in runs]
    if len(set(labels)) != len(labels):
        labels = [os.path.basename(os.path.normpath(d)) for d, _, _ in runs]
    reports = []
    for (run_dir, fact, _), label in zip(runs, labels):
        try:
            reports.append(evaluate_factors(scene.true_endmembers, scene.true_abundances, fact.U, fact.V, label))
        except ValueError as exc:
            raise UsageError(f"{run_dir}: {exc}") from None
    os.makedirs(args.out, exist_ok=True)
    for rep in reports:
        dump_report(os.path.join(args.out, f"eval_{rep.method_label}.json"), rep)
    table = format_table(reports)
    with open(os.path.join(args.out, "table.txt"), "w", encoding="utf-8") as fh:
        fh.write(table)
    write_manifest(args.out, "evaluate", None, [], started, {
        "scene_dir": os.path.abspath(args.scene_dir),
        "run_dirs": [os.path.abspath(d) for d in args.run_dirs],
    })
    print(table, end="")
    return EXIT_OK


def _pipeline_seed(config, seed, args, lam, graph_spec):
    base = os.path.join(args.out, f"seed_{seed}")
    cfg = SceneConfig(config.scale_factor, config.filter_sigma, config.snr_db, seed,
                      config.material_names, config.label_map_path)
    scene = run_simulation(cfg, args.library, os.path.join(base, "scene"))
    p = scene.true_endmembers.shape[1]
    result = {"seed": seed}
    for method, mlam in (("nmf", 0.0), ("gnmf", lam)):
        run_dir = os.path.join(base, method)
        fact = run_unmixing(scene, method, mlam, graph_spec, p, seed, args.max_iter, args.tol,
                            not args.no_asc, run_dir)
        rep = evaluate_factors(scene.true_endmembers, scene.true_abundances, fact.U, fact.V, method.upper())
        dump_report(os.path.join(run_dir, "eval.json"), rep)
        result[method] = {
            "rms_sad_deg": rep.rms_sad_deg,
            "rms_aad_deg": rep.rms_aad_deg,
            "iterations_run": fact.iterations_run,
            "converged": fact.converged,
        }
    return result


def cmd_pipeline(args):
    started = _now()
    if not args.seeds:
        raise UsageError("at least one seed is required (--seeds)")
    if len(set(args.seeds)) != len(args.seeds):
        raise UsageError("seeds must be unique")
    args.method = "gnmf"
    lam, graph_spec = solver_settings(args)
    config = read_config(args.config)
    workers = max(1, int(os.environ.get("UNMIX_THREADS", "1") or 1))

    results, failures = {}, {}
    with concurrent.futures.ThreadPoolExecutor(max_workers=workers) as pool:
        futures = {pool.submit(_pipeline_seed, config, s, args, lam, graph_spec): s for s in args.seeds}
        for fut in concurrent.futures.as_completed(futures):
            seed = futures[fut]
            try:
                results[seed] = fut.result()
            except (SolverDivergence, UsageError, ValueError, OSError) as exc:
                failures[seed] = str(exc)

    ok = [results[s] for s in args.seeds if s in results]
    aggregate = {"seeds": list(args.seeds), "lambda": lam, "graph": graph_spec, "methods": {},
                 "failed": [{"seed": s, "error": failures[s]} for s in args.seeds if s in failures]}
    for method in ("nmf", "gnmf"):
        entries = [dict(seed=r["seed"], **r[method]) for r in ok]
        aggregate["methods"][method] = {
            "runs": entries,
            "median_rms_sad_deg": float(np.median([e["rms_sad_deg"] for e in entries])) if entries else None,
            "median_rms_aad_deg": float(np.median([e["rms_aad_deg"] for e in entries])) if entries else None,
        }
    os.makedirs(args.out, exist_ok=True)
    _write_json(os.path.join(args.out, "aggregate.json"), aggregate)
    write_manifest(args.out, "pipeline", args.config, args.seeds, started)

    if ok:
        m = aggregate["methods"]
        print(f"medians over {len(ok)} seed(s)")
        print(f"{'':<16}{'NMF':>10}{'GNMF':>10}")
        print(f"{'rms_SAD (deg)':<16}{m['nmf']['median_rms_sad_deg']:>10.2f}{m['gnmf']['median_rms_sad_deg']:>10.2f}")
        print(f"{'rms_AAD (deg)':<16}{m['nmf']['median_rms_aad_deg']:>10.2f}{m['gnmf']['median_rms_aad_deg']:>10.2f}")
    for s, err in failures.items():
        print(f"seed {s} failed: {err}", file=sys.stderr)
    return EXIT_FAILED if failures else EXIT_OK


# -- argument parsing -------------------------------------------------------


def _add_solver_flags(p, with_method=True):
    if with_method:
        p.add_argument("--method", choices=("nmf", "gnmf"), default="gnmf")
    p.add_argument("--lambda", dest="lam", type=float, default=None,
                   help=f"graph regularization weight (gnmf only, default {DEFAULT_GNMF_LAMBDA:g})")
    p.add_argument("--graph", choices=("spatial4", "spatial8", "knn"), default="knn")
    p.add_argument("--knn-p", type=int, default=5)
    p.add_argument("--weighting", choices=("binary", "heat", "dot"), default="binary")
    p.add_argument("--sigma-h", type=float, default=None)
    p.add_argument("--max-iter", type=int, default=1000)
    p.add_argument("--tol", type=float, default=1e-6)
    p.add_argument("--no-asc", action="store_true", help="skip sum-to-one renormalization of abundances")


def build_parser():
    parser = argparse.ArgumentParser(prog="graphunmix", description=__doc__.splitlines()[0])
    parser.add_argument("--version", action="version", version=__version__)
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("simulate", help="generate a synthetic mixed-pixel scene")
    p.add_argument("config", help="scene config JSON")
    p.add_argument("--out", required=True)
    p.add_argument("--library", default=BUNDLED_LIBRARY)
    p.set_defaults(func=cmd_simulate)

    p = sub.add_parser("estimate-p", help="estimate the number of endmembers by PCA")
    p.add_argument("scene_dir")
    p.add_argument("--threshold", type=float, default=0.995)
    p.add_argument("--centered", action=argparse.BooleanOptionalAction, default=True)
    p.add_argument("--out", default="estimate-p")
    p.set_defaults(func=cmd_estimate_p)

    p = sub.add_parser("unmix", help="factor a scene with NMF or GNMF")
    p.add_argument("scene_dir")
    p.add_argument("--out", required=True)
    _add_solver_flags(p)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--endmembers", default=None,
                   help="number of endmembers, or 'auto' for the PCA estimate (default: scene's P)")
    p.add_argument("--threshold", type=float, default=0.995)
    p.add_argument("--centered", action=argparse.BooleanOptionalAction, default=True)
    p.set_defaults(func=cmd_unmix)

    p = sub.add_parser("evaluate", help="score runs against scene ground truth")
    p.add_argument("scene_dir")
    p.add_argument("run_dirs", nargs="+")
    p.add_argument("--out", default="evaluation")
    p.set_defaults(func=cmd_evaluate)

    p = sub.add_parser("pipeline", help="simulate, unmix with NMF and GNMF, evaluate, per seed")
    p.add_argument("config", nargs="?", default=BUNDLED_CONFIG)
    p.add_argument("--seeds", type=int, nargs="*", default=[])
    p.add_argument("--out", required=True)
    p.add_argument("--library", default=BUNDLED_LIBRARY)
    _add_solver_flags(p, with_method=False)
    p.set_defaults(func=cmd_pipeline)
    return parser


def main(argv=None):
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        return args.func(args)
    except ConfigError as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return EXIT_USAGE
    except (UsageError, FormatError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_USAGE


if __name__ == "__main__":
    sys.exit(main())
