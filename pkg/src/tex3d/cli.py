"""Command-line interface.

Exit codes: 0 success, 1 usage/config error, 2 data error, 3 numeric failure.
"""

from __future__ import annotations

import argparse
import contextlib
import json
import os
import sys
import warnings
from dataclasses import fields
from pathlib import Path

import numpy as np

from . import checkpoint, generator as G, gradcheck, plotting, pooling, render, shapes, train as T
from .layers import NumericError
from .mesh import MeshError, build_face_graph, export_face_colors, load_obj, write_point_ply

EXIT_OK, EXIT_USAGE, EXIT_DATA, EXIT_NUMERIC = 0, 1, 2, 3
THREADS_ENV = "TEX3D_THREADS"
CHECKPOINT_NAME = "checkpoint.ckpt"
METRICS_NAME = "metrics.csv"


class UsageError(Exception):
    pass


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        self.print_usage(sys.stderr)
        self.exit(EXIT_USAGE, f"{self.prog}: error: {message}\n")


def _read_mesh(source: str, base: Path | None = None):
    if source.startswith("builtin:"):
        return shapes.builtin(source.split(":", 1)[1])
    p = Path(source)
    if base is not None and not p.is_absolute():
        p = base / p
    return load_obj(p)


# ------------------------------------------------------------------ config


def default_run_config() -> dict:
    return {
        "generator": G.GeneratorConfig().to_dict(),
        "train": T.TrainConfig().to_dict(),
        "meshes": ["builtin:icosphere2"],
        "out_dir": "run",
    }


def _check_keys(section: dict, cls, name: str, errs: list[str]) -> dict:
    if not isinstance(section, dict):
        errs.append(f"{name} must be an object")
        return {}
    known = {f.name for f in fields(cls)}
    for k in sorted(set(section) - known):
        errs.append(f"unknown key {name}.{k}")
    return {k: v for k, v in section.items() if k in known}


def parse_run_config(raw: dict) -> tuple[G.GeneratorConfig, T.TrainConfig, list[str], str]:
    """Validate a run config, collecting every problem before raising ``UsageError``."""
    errs: list[str] = []
    if not isinstance(raw, dict):
        raise UsageError("config must be a JSON object")
    for k in sorted(set(raw) - {"generator", "train", "meshes", "out_dir"}):
        errs.append(f"unknown key {k}")
    gsec = _check_keys(raw.get("generator", {}), G.GeneratorConfig, "generator", errs)
    tsec = _check_keys(raw.get("train", {}), T.TrainConfig, "train", errs)
    gcfg = tcfg = None
    try:
        gcfg = G.GeneratorConfig(**gsec)
        errs += [f"generator: {e}" for e in gcfg.validate()]
    except TypeError as exc:
        errs.append(f"generator: {exc}")
    try:
        tcfg = T.TrainConfig(**tsec)
        errs += [f"train: {e}" for e in tcfg.validate()]
    except TypeError as exc:
        errs.append(f"train: {exc}")
    meshes = raw.get("meshes", ["builtin:icosphere2"])
    if not isinstance(meshes, list) or not meshes or not all(isinstance(m, str) for m in meshes):
        errs.append("meshes must be a nonempty list of paths")
    out_dir = raw.get("out_dir", "run")
    if not isinstance(out_dir, str):
        errs.append("out_dir must be a string")
    if errs:
        raise UsageError("invalid config:\n  " + "\n  ".join(errs))
    return gcfg, tcfg, meshes, out_dir


def _resolved(gcfg, tcfg, meshes, out_dir) -> dict:
    return {"generator": gcfg.to_dict(), "train": tcfg.to_dict(), "meshes": meshes,
            "out_dir": out_dir}


# ---------------------------------------------------------------- commands


def cmd_graph(args) -> int:
    mesh = _read_mesh(args.mesh)
    with warnings.catch_warnings():
        warnings.simplefilter("ignore")
        g = build_face_graph(mesh)
    deg = g.degrees()
    hist = {str(int(d)): int(c) for d, c in zip(*np.unique(deg, return_counts=True))}

    def summary(x):
        return {"min": float(x.min()), "max": float(x.max()), "mean": float(x.mean())}

    stats = {
        "nodes": g.n_nodes,
        "edges": int(g.adjacency.nnz // 2),
        "degree_histogram": hist,
        "non_manifold_edges": g.non_manifold_edges,
        "curvature": {"gaussian": summary(g.node_features[:, 6]),
                      "mean": summary(g.node_features[:, 7])},
    }
    if g.non_manifold_edges:
        print(f"warning: {g.non_manifold_edges} non-manifold edges", file=sys.stderr)
    Path(args.out).parent.mkdir(parents=True, exist_ok=True)
    with open(args.out, "w", encoding="utf-8", newline="\n") as fh:
        json.dump(stats, fh, indent=2, sort_keys=True)
        fh.write("\n")
    if args.figure:
        plotting.plot_curvature(g.node_features, args.figure)
    print(f"{stats['nodes']} nodes, {stats['edges']} edges, degrees {hist}")
    return EXIT_OK


def cmd_pool(args) -> int:
    if args.method not in pooling.METHODS:
        raise UsageError(f"unknown method {args.method!r}; valid methods: {', '.join(pooling.METHODS)}")
    try:
        sizes = [int(s) for s in args.levels.split(",")]
    except ValueError:
        raise UsageError(f"--levels must be comma-separated integers, got {args.levels!r}") from None
    mesh = _read_mesh(args.mesh)
    g = build_face_graph(mesh)
    if sizes[0] != g.n_nodes:
        sizes = [g.n_nodes] + sizes
    with warnings.catch_warnings(record=True) as caught:
        warnings.simplefilter("always")
        h = pooling.build_hierarchy(g.node_positions, g.node_features, g.adjacency,
                                    method=args.method, sizes=sizes, seed=args.seed, k=args.k)
    for w in caught:
        print(f"warning: {w.message}", file=sys.stderr)
    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    pooling.save_hierarchy(h, out / "hierarchy.json")
    lines = ["level,nodes,edges"]
    for i, (pos, adj) in enumerate(zip(h.positions, h.adjacencies)):
        write_point_ply(pos, out / f"level_{i}.ply")
        lines.append(f"{i},{len(pos)},{adj.nnz // 2}")
    (out / "levels.csv").write_text("\n".join(lines) + "\n", encoding="utf-8")
    if args.figure:
        plotting.plot_hierarchy(h, out / "hierarchy.png")
    print(f"{args.method} hierarchy: {h.level_sizes}")
    return EXIT_OK


def cmd_gradcheck(args, registry=None) -> int:
    registry = gradcheck.REGISTRY if registry is None else registry
    ops = list(registry) if args.all else [args.op]
    for op in ops:
        if op not in registry:
            raise UsageError(f"unknown op {op!r}; available: {', '.join(registry)}")
    worst = 0.0
    print(f"{'op':<22s} {'max_rel_err':>12s}  status")
    for op in ops:
        err = gradcheck.grad_check(op, seed=args.seed, registry=registry)
        ok = err < gradcheck.TOLERANCE
        worst = max(worst, err)
        print(f"{op:<22s} {err:12.3e}  {'ok' if ok else 'FAIL'}")
    return EXIT_OK if worst < gradcheck.TOLERANCE else EXIT_NUMERIC


def _load_config_file(path: str | None) -> tuple[dict, Path]:
    if path is None:
        return default_run_config(), Path.cwd()
    p = Path(path)
    if not p.exists():
        raise UsageError(f"config file not found: {path}")
    try:
        raw = json.loads(p.read_text(encoding="utf-8"))
    except json.JSONDecodeError as exc:
        raise UsageError(f"{path}: invalid JSON: {exc}") from None
    return raw, p.resolve().parent


def cmd_train(args) -> int:
    raw, base = _load_config_file(args.config)
    gcfg, tcfg, mesh_sources, out_dir = parse_run_config(raw)
    if args.dump_config:
        json.dump(_resolved(gcfg, tcfg, mesh_sources, out_dir), sys.stdout, indent=2, sort_keys=True)
        sys.stdout.write("\n")
        return EXIT_OK
    if args.config is None:
        raise UsageError("train needs a config file (use --dump-config for a template)")
    missing = [m for m in mesh_sources if not m.startswith("builtin:")
               and not (Path(m) if Path(m).is_absolute() else base / m).exists()]
    if missing:
        print("error: missing mesh files: " + ", ".join(missing), file=sys.stderr)
        return EXIT_DATA
    meshes = [_read_mesh(m, base) for m in mesh_sources]
    ctxs = [G.prepare_mesh(m, gcfg) for m in meshes]
    out = Path(out_dir) if Path(out_dir).is_absolute() else base / out_dir
    out.mkdir(parents=True, exist_ok=True)
    gw, dw = T.init_state(gcfg, tcfg)
    chi0 = T.evaluate_chi2(ctxs, gw, gcfg, tcfg)

    def progress(step, d, g, c):
        if args.verbose and (step % 100 == 0 or step == tcfg.steps - 1):
            print(f"step {step:5d}  d_loss {d:.4f}  g_loss {g:.4f}  hist_chi2 {c:.4f}")

    res = T.train(ctxs, gcfg, tcfg, state=(gw, dw), progress=progress)
    chi1 = T.evaluate_chi2(ctxs, res.generator, gcfg, tcfg)
    meta = _resolved(gcfg, tcfg, mesh_sources, out_dir)
    checkpoint.save_checkpoint(out / CHECKPOINT_NAME, {**res.generator, **res.discriminator}, meta)
    T.write_metrics_csv(res.log, out / METRICS_NAME)
    with open(out / "config.json", "w", encoding="utf-8", newline="\n") as fh:
        json.dump(meta, fh, indent=2, sort_keys=True)
        fh.write("\n")
    with open(out / "summary.json", "w", encoding="utf-8", newline="\n") as fh:
        json.dump({"steps": tcfg.steps, "eval_hist_chi2_initial": chi0,
                   "eval_hist_chi2_final": chi1}, fh, indent=2, sort_keys=True)
        fh.write("\n")
    if res.log and not args.no_figure:
        plotting.plot_training_curves(res.log, out / "training.png")
    print(f"trained {tcfg.steps} steps; eval hist chi2 {chi0:.4f} -> {chi1:.4f}; wrote {out}")
    return EXIT_OK


def load_generator(path):
    """Weights and configs from a checkpoint written by ``train``."""
    arrays, meta = checkpoint.load_checkpoint(path)
    try:
        gcfg, tcfg, _, _ = parse_run_config(meta)
    except UsageError as exc:
        raise checkpoint.CheckpointError(f"{path}: bad embedded config: {exc}") from None
    expect = G.init_weights(gcfg)
    bad = [k for k, v in expect.items() if k not in arrays or arrays[k].shape != v.shape]
    if bad:
        raise checkpoint.CheckpointError(
            f"{path}: checkpoint does not match its config ({len(bad)} arrays, e.g. {bad[0]})")
    return {k: arrays[k] for k in expect}, gcfg, tcfg


SHEET_VIEWS = 4


def cmd_generate(args) -> int:
    gw, gcfg, tcfg = load_generator(args.checkpoint)
    mesh = _read_mesh(args.mesh)
    ctx = G.prepare_mesh(mesh, gcfg)
    z = np.random.default_rng(args.z_seed).standard_normal(gcfg.z_dim)
    rgb = G.forward(ctx, z, gw, gcfg)
    Path(args.out).parent.mkdir(parents=True, exist_ok=True)
    export_face_colors(mesh, rgb, args.out)
    if args.render:
        cams = render.sample_cameras(args.camera_seed, SHEET_VIEWS, size=tcfg.image_size,
                                     scale=tcfg.camera_scale)
        tiles = [render.render(mesh, rgb, c).image for c in cams]
        plotting.save_png(plotting.contact_sheet(tiles, cols=2), args.render)
    print(f"wrote {args.out} ({mesh.n_faces} faces)")
    return EXIT_OK


# -------------------------------------------------------------------- main


def build_parser() -> argparse.ArgumentParser:
    p = _Parser(prog="tex3d", description="Texture generation on arbitrary triangle meshes.")
    p.add_argument("--threads", type=int, default=None,
                   help=f"BLAS thread count (default ${THREADS_ENV}); 1 for bit-reproducibility")
    sub = p.add_subparsers(dest="command", required=True, parser_class=_Parser)

    s = sub.add_parser("graph", help="face-graph statistics")
    s.add_argument("mesh", help="OBJ path or builtin:<name>")
    s.add_argument("out", help="output JSON")
    s.add_argument("--figure", help="optional curvature histogram PNG")
    s.set_defaults(func=cmd_graph)

    s = sub.add_parser("pool", help="build and dump a pooling hierarchy")
    s.add_argument("mesh")
    s.add_argument("--method", default="fps")
    s.add_argument("--levels", required=True, help="comma-separated level sizes, finest first")
    s.add_argument("--seed", type=int, default=0)
    s.add_argument("--k", type=int, default=3, help="kNN size for interpolation unpooling")
    s.add_argument("--out", required=True, help="output directory")
    s.add_argument("--figure", action="store_true", help="also write hierarchy.png")
    s.set_defaults(func=cmd_pool)

    s = sub.add_parser("gradcheck", help="finite-difference check of backward passes")
    g = s.add_mutually_exclusive_group(required=True)
    g.add_argument("--all", action="store_true")
    g.add_argument("op", nargs="?")
    s.add_argument("--seed", type=int, default=0)
    s.set_defaults(func=cmd_gradcheck)

    s = sub.add_parser("train", help="adversarial training on the toy task")
    s.add_argument("config", nargs="?")
    s.add_argument("--dump-config", action="store_true",
                   help="print the fully resolved config and exit")
    s.add_argument("--no-figure", action="store_true")
    s.add_argument("-v", "--verbose", action="store_true")
    s.set_defaults(func=cmd_train)

    s = sub.add_parser("generate", help="texture a mesh with a trained checkpoint")
    s.add_argument("checkpoint")
    s.add_argument("mesh")
    s.add_argument("--z-seed", type=int, default=0)
    s.add_argument("--out", required=True, help="output PLY")
    s.add_argument("--render", help="optional 4-view contact sheet PNG")
    s.add_argument("--camera-seed", type=int, default=0)
    s.set_defaults(func=cmd_generate)
    return p


def _thread_limit(n):
    if n is None:
        env = os.environ.get(THREADS_ENV)
        try:
            n = int(env) if env else None
        except ValueError:
            raise UsageError(f"{THREADS_ENV} must be an integer, got {env!r}") from None
    if n is None:
        return contextlib.nullcontext()
    if n < 1:
        raise UsageError("thread count must be >= 1")
    from threadpoolctl import threadpool_limits
    return threadpool_limits(limits=n)


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        with _thread_limit(args.threads):
            return args.func(args)
    except UsageError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_USAGE
    except NumericError as exc:
        print(f"numeric failure: {exc}", file=sys.stderr)
        return EXIT_NUMERIC
    except (MeshError, FileNotFoundError, checkpoint.CheckpointError, KeyError, ValueError,
            OSError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_DATA


if __name__ == "__main__":
    sys.exit(main())
