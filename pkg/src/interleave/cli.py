"""Command-line entry point: ``interleave <command> ...``.

Exit codes: 0 success, 1 input error, 2 infinite bound, 3 budget exhausted
without a proof of optimality.
"""
from __future__ import annotations

import argparse
import csv
import datetime as _dt
import json
import logging
import math
import os
import sys
from pathlib import Path
from typing import List, Optional, Sequence

from . import __version__
from .blockmat import build_bundle
from .graph import GraphError, MapperGraph, read_graph, validate, write_graph

log = logging.getLogger("interleave")

EXIT_OK, EXIT_INPUT, EXIT_INFINITE, EXIT_BUDGET = 0, 1, 2, 3


class InputError(Exception):
    pass


def _num(x: float):
    return "inf" if math.isinf(x) else int(x)


def _emit(obj: dict, args) -> None:
    if not args.deterministic:
        obj = dict(obj)
        obj["timestamp"] = _dt.datetime.now(_dt.timezone.utc).isoformat(timespec="seconds")
    json.dump(obj, sys.stdout, indent=1, sort_keys=False)
    sys.stdout.write("\n")


def _scrub(obj):
    """Drop wall-clock fields so output is byte-stable."""
    if isinstance(obj, dict):
        return {k: _scrub(v) for k, v in obj.items() if k != "seconds"}
    if isinstance(obj, list):
        return [_scrub(v) for v in obj]
    return obj


def _budget(args):
    from .optimize import Budget

    if args.budget_nodes <= 0 or args.budget_seconds <= 0:
        raise InputError("budgets must be positive")
    return Budget(args.budget_nodes, args.budget_seconds)


def _load(path: str) -> MapperGraph:
    try:
        g = read_graph(path)
    except FileNotFoundError:
        raise InputError(f"{path}: no such file") from None
    except GraphError as exc:
        raise InputError(f"{path}: {exc}") from None
    diag = validate(g)
    if not diag.valid:
        raise InputError(f"{path}: invalid mapper graph: {'; '.join(diag.violations)}")
    return g


def _plot_dir(args) -> Optional[Path]:
    if getattr(args, "plot_dir", None):
        p = Path(args.plot_dir)
        p.mkdir(parents=True, exist_ok=True)
        return p
    return None


# -- commands ---------------------------------------------------------------

def cmd_bound(args) -> int:
    from .optimize import SearchTrace, evaluate_n, search_over_n

    f, g = _load(args.graph_a), _load(args.graph_b)
    budget = _budget(args)
    if args.n is not None:
        if args.n < 0:
            raise InputError("--n must be nonnegative")
        trace = SearchTrace([evaluate_n(f, g, args.n, budget)], (args.n, args.n))
    else:
        trace = search_over_n(f, g, budget)
    best = trace.best
    out = {
        "graph_a": Path(args.graph_a).stem, "graph_b": Path(args.graph_b).stem,
        "n": best.n, "k": _num(best.k), "bound": _num(best.bound), "proved": trace.proved,
        "loss": best.result.report.to_dict() if best.result else None,
        "trace": trace.to_dict(),
    }
    if args.deterministic:
        out = _scrub(out)
    if args.format == "csv":
        w = csv.writer(sys.stdout, lineterminator="\n")
        w.writerow(["graph_a", "graph_b", "n", "k", "bound", "proved"])
        w.writerow([out["graph_a"], out["graph_b"], best.n, _num(best.k), _num(best.bound), trace.proved])
    else:
        _emit(out, args)
    plots = _plot_dir(args)
    if plots:
        from . import report

        stem = f"{out['graph_a']}_vs_{out['graph_b']}"
        report.plot_trace(trace, plots / f"{stem}_trace.png", title=stem)
        report.plot_graph(f, plots / f"{out['graph_a']}.png", out["graph_a"])
        report.plot_graph(g, plots / f"{out['graph_b']}.png", out["graph_b"])
    if math.isinf(best.bound):
        return EXIT_INFINITE
    return EXIT_OK if trace.proved else EXIT_BUDGET


def _graph_files(directory: str) -> List[Path]:
    d = Path(directory)
    if not d.is_dir():
        raise InputError(f"{directory}: not a directory")
    files = sorted(d.glob("*.json"))
    if len(files) < 2:
        raise InputError(f"{directory}: need at least two graph files")
    return files


def cmd_pairwise(args) -> int:
    from .pairwise import pairwise_bounds

    files = _graph_files(args.directory)
    graphs = [(p.stem, _load(str(p))) for p in files]
    if args.jobs < 1:
        raise InputError("--jobs must be positive")
    art = pairwise_bounds(graphs, jobs=args.jobs, budget=_budget(args), n=args.n)
    if args.deterministic:
        art.meta = _scrub(art.meta)
    out = open(args.out, "w", newline="") if args.out else sys.stdout
    try:
        if args.format == "csv":
            art.to_csv(out)
        else:
            doc = art.to_dict()
            if not args.deterministic:
                doc["timestamp"] = _dt.datetime.now(_dt.timezone.utc).isoformat(timespec="seconds")
            out.write(json.dumps(doc, indent=1, sort_keys=True) + "\n")
    finally:
        if args.out:
            out.close()
    plots = _plot_dir(args)
    if plots:
        from . import report

        report.plot_matrix(art.values, art.labels, plots / "pairwise.png", "pairwise bounds")
    unproved = any(not m.get("proved", False) for m in art.meta.values())
    return EXIT_BUDGET if unproved else EXIT_OK


def cmd_classify(args) -> int:
    from .classify import LabelMismatch, classify, read_labels
    from .pairwise import read_matrix_csv

    try:
        names, values = read_matrix_csv(args.matrix)
    except (OSError, ValueError) as exc:
        raise InputError(str(exc)) from None
    if args.labels:
        try:
            table = read_labels(args.labels)
        except (OSError, LabelMismatch) as exc:
            raise InputError(str(exc)) from None
        missing = [n for n in names if n not in table]
        if missing:
            raise InputError(f"no label for {', '.join(missing[:5])}")
        labels = [table[n] for n in names]
    else:
        labels = [n.split(args.label_sep)[0] for n in names]
    try:
        rep = classify(values, labels, k=args.k, k_max=args.k_max, folds=args.folds, seed=args.seed)
    except LabelMismatch as exc:
        raise InputError(str(exc)) from None
    if args.confusion_out:
        rep.write_confusion_csv(args.confusion_out)
    if args.format == "csv":
        rep.write_confusion_csv(sys.stdout)
    else:
        out = rep.to_dict()
        out["n_samples"] = len(labels)
        out["baseline"] = round(1 / len(rep.classes), 6)
        _emit(out, args)
    plots = _plot_dir(args)
    if plots:
        from . import report

        report.plot_confusion(rep, plots / "confusion.png")
        report.plot_matrix(values, names, plots / "distance_matrix.png", "distance matrix")
    return EXIT_OK


def cmd_generate(args) -> int:
    from .ingest import generators as gen
    from .ingest.mapper import CoverSpec, mapper_details, write_point_csv

    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    written = []
    try:
        if args.fixture == "line":
            lo, hi = args.range
            path = out / f"line_{lo}_{hi}.json"
            write_graph(gen.line_mapper(lo, hi), path)
            written.append(path)
        elif args.fixture == "torus":
            lo, hi = args.range
            for h in args.h:
                path = out / f"torus_h{h}.json"
                write_graph(gen.torus_mapper(gen.TorusSpec(h, lo, hi)), path)
                written.append(path)
        elif args.fixture == "counterexample":
            f, g = gen.counterexample_pair()
            for name, gr in (("counterexample_F", f), ("counterexample_G", g)):
                write_graph(gr, out / f"{name}.json")
                written.append(out / f"{name}.json")
        elif args.fixture == "letters":
            spec = CoverSpec(args.intervals, args.overlap, args.epsilon or 0.06, args.levels)
            labels = []
            for name, cloud in gen.letter_dataset(args.letters, seed=args.seed):
                build = mapper_details(cloud, spec)
                write_graph(build.graph, out / f"{name}.json")
                written.append(out / f"{name}.json")
                labels.append((name, cloud.label))
                if args.clouds:
                    write_point_csv(cloud, out / f"{name}.csv")
            with open(out / "labels.csv", "w", newline="") as fh:
                w = csv.writer(fh, lineterminator="\n")
                w.writerow(["name", "label"])
                w.writerows(labels)
        elif args.fixture == "annulus":
            import numpy as np

            spec = CoverSpec(args.intervals, args.overlap, args.epsilon or 0.1, args.levels)
            cloud = gen.annulus_cloud(rng=np.random.default_rng(args.seed))
            path = out / "annulus.json"
            write_graph(mapper_details(cloud, spec).graph, path)
            written.append(path)
    except (gen.SpecError, ValueError) as exc:
        raise InputError(str(exc)) from None
    for p in written:
        print(p)
    plots = _plot_dir(args)
    if plots:
        from . import report

        for p in written:
            report.plot_graph(read_graph(p), plots / f"{p.stem}.png", p.stem)
    return EXIT_OK


def _model_for(args):
    from .optimize import EmptyBlockInfeasible, build_model

    f, g = _load(args.graph_a), _load(args.graph_b)
    if args.n < 0:
        raise InputError("--n must be nonnegative")
    try:
        return build_model(build_bundle(f, g, args.n))
    except EmptyBlockInfeasible as exc:
        raise InputError(f"no assignment exists at n={args.n}: {exc}") from None


def cmd_export_lp(args) -> int:
    from .optimize import export_lp

    model = _model_for(args)
    export_lp(model, args.out)
    print(args.out)
    return EXIT_OK


def cmd_import_solution(args) -> int:
    from .optimize import ConstraintViolation, MalformedSolution, ObjectiveMismatch, import_solution

    model = _model_for(args)
    try:
        a, rep = import_solution(model, args.solution)
    except FileNotFoundError:
        raise InputError(f"{args.solution}: no such file") from None
    except (MalformedSolution, ConstraintViolation, ObjectiveMismatch) as exc:
        raise InputError(f"{type(exc).__name__}: {exc}") from None
    out = rep.to_dict()
    if args.format == "csv":
        w = csv.writer(sys.stdout, lineterminator="\n")
        w.writerow(["term", "value"])
        for t, v in out["per_term"].items():
            w.writerow([t, v])
        w.writerow(["aggregate", out["aggregate"]])
        w.writerow(["bound", out["bound"]])
    else:
        _emit(out, args)
    return EXIT_INFINITE if math.isinf(rep.bound) else EXIT_OK


def cmd_validate(args) -> int:
    try:
        g = read_graph(args.graph, canonicalize=False)
    except FileNotFoundError:
        raise InputError(f"{args.graph}: no such file") from None
    except GraphError as exc:
        raise InputError(f"{args.graph}: {exc}") from None
    diag = validate(g)
    out = diag.to_dict()
    out.update(n_vertices=g.n_vertices, n_edges=g.n_edges, cycle_rank=g.cycle_rank())
    if args.format == "csv":
        w = csv.writer(sys.stdout, lineterminator="\n")
        w.writerow(["valid", "connected", "n_components", "n_vertices", "n_edges", "violations"])
        w.writerow([diag.valid, diag.connected, diag.n_components, g.n_vertices, g.n_edges,
                    " | ".join(diag.violations)])
    else:
        json.dump(out, sys.stdout, indent=1)
        sys.stdout.write("\n")
    return EXIT_OK if diag.valid else EXIT_INPUT


def cmd_mapper(args) -> int:
    from .ingest.mapper import (CoverSpec, DegenerateRange, AllBackground, image_to_cloud,
                                mapper_details, read_bitmap, read_point_csv)

    src = Path(args.input)
    if not src.exists():
        raise InputError(f"{src}: no such file")
    try:
        if src.suffix.lower() == ".csv":
            cloud = read_point_csv(src)
        else:
            cloud = image_to_cloud(read_bitmap(src))
        build = mapper_details(cloud, CoverSpec(args.intervals, args.overlap, args.epsilon, args.levels))
    except (ValueError, OSError) as exc:
        raise InputError(f"{src}: {exc}") from None
    write_graph(build.graph, args.out)
    info = {"out": str(args.out), "n_vertices": build.graph.n_vertices, "n_edges": build.graph.n_edges,
            "clusters_per_interval": build.clusters_per_interval, "components": build.components,
            "kept_largest": build.kept_largest}
    json.dump(info, sys.stdout, indent=1)
    sys.stdout.write("\n")
    plots = _plot_dir(args)
    if plots:
        from . import report

        report.plot_graph(build.graph, plots / f"{Path(args.out).stem}.png")
    return EXIT_OK


# -- parser -------------------------------------------------------------------

def _add_budget(p):
    p.add_argument("--budget-nodes", type=int, default=1_000_000, help="search nodes per (pair, n)")
    p.add_argument("--budget-seconds", type=float, default=60.0, help="wall-clock seconds per (pair, n)")


def _add_common(p, formats=True, fmt="json"):
    if formats:
        p.add_argument("--format", choices=("json", "csv"), default=fmt)
    p.add_argument("--deterministic", action="store_true", help="omit timestamps and timings")
    p.add_argument("--plot-dir", help="also write figures (PNG) into this directory")


def _add_shift(p):
    g = p.add_mutually_exclusive_group()
    g.add_argument("--n", type=int, help="evaluate a single shift n")
    g.add_argument("--search", action="store_true", help="search over n (default)")


def _add_cover(p, epsilon=None, eps_help="single-linkage radius (default 0.06 for letters, 0.1 for the annulus)"):
    p.add_argument("--intervals", type=int, default=10)
    p.add_argument("--overlap", type=_overlap, default=0.3)
    p.add_argument("--epsilon", type=float, default=epsilon, help=eps_help)
    p.add_argument("--levels", type=int, default=20, help="levels are rescaled to [0, LEVELS]")


def _overlap(s: str) -> float:
    v = float(s)
    if not 0 < v < 0.5:
        raise argparse.ArgumentTypeError("overlap must lie in (0, 0.5) so only adjacent intervals meet")
    return v


def build_parser() -> argparse.ArgumentParser:
    ap = argparse.ArgumentParser(prog="interleave", description=__doc__.splitlines()[0])
    ap.add_argument("--version", action="version", version=__version__)
    sub = ap.add_subparsers(dest="command", required=True)

    p = sub.add_parser("bound", help="bound the interleaving distance of two graphs")
    p.add_argument("graph_a")
    p.add_argument("graph_b")
    _add_shift(p)
    _add_budget(p)
    _add_common(p)
    p.set_defaults(func=cmd_bound)

    p = sub.add_parser("pairwise", help="bound matrix for every graph file in a directory")
    p.add_argument("directory")
    _add_shift(p)
    _add_budget(p)
    p.add_argument("--jobs", type=int, default=1)
    p.add_argument("--out", help="write the matrix here instead of stdout")
    _add_common(p, fmt="csv")
    p.set_defaults(func=cmd_pairwise)

    p = sub.add_parser("classify", help="k-NN classification from a bound matrix")
    p.add_argument("matrix")
    p.add_argument("labels", nargs="?", help="CSV of name,label (default: name prefix)")
    p.add_argument("--label-sep", default="_")
    p.add_argument("--k", type=int)
    p.add_argument("--k-max", type=int, default=30)
    p.add_argument("--folds", type=int, default=5)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--confusion-out")
    _add_common(p)
    p.set_defaults(func=cmd_classify)

    p = sub.add_parser("generate", help="write fixture graphs")
    p.add_argument("fixture", choices=("line", "torus", "counterexample", "letters", "annulus"))
    p.add_argument("--out", default=".")
    p.add_argument("--h", type=int, nargs="+", default=[11], help="loop heights for torus")
    p.add_argument("--range", type=int, nargs=2, default=(0, 20), metavar=("LO", "HI"))
    p.add_argument("--letters", default="ABDIRW")
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--clouds", action="store_true", help="also write the letter point clouds")
    _add_cover(p)
    _add_common(p, formats=False)
    p.set_defaults(func=cmd_generate)

    for name, func, help_ in (("export-lp", cmd_export_lp, "write the integer model as an LP file"),
                              ("import-solution", cmd_import_solution, "check a solver's solution")):
        p = sub.add_parser(name, help=help_)
        p.add_argument("graph_a")
        p.add_argument("graph_b")
        p.add_argument("--n", type=int, required=True)
        if name == "export-lp":
            p.add_argument("--out", required=True)
        else:
            p.add_argument("--solution", required=True)
        _add_common(p)
        p.set_defaults(func=func)

    p = sub.add_parser("validate", help="check a mapper graph file")
    p.add_argument("graph")
    _add_common(p)
    p.set_defaults(func=cmd_validate)

    p = sub.add_parser("mapper", help="build a mapper graph from a point CSV or a bitmap")
    p.add_argument("input")
    p.add_argument("--out", required=True)
    _add_cover(p, epsilon=3.0, eps_help="single-linkage radius in input units (pixels for bitmaps)")
    _add_common(p, formats=False)
    p.set_defaults(func=cmd_mapper)
    return ap


def main(argv: Optional[Sequence[str]] = None) -> int:
    level = getattr(logging, os.environ.get("INTERLEAVE_LOG", "WARNING").upper(), None)
    logging.basicConfig(level=level if isinstance(level, int) else logging.WARNING,
                        format="%(levelname)s %(name)s: %(message)s", stream=sys.stderr)
    args = build_parser().parse_args(argv)
    try:
        return args.func(args)
    except InputError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_INPUT


if __name__ == "__main__":
    sys.exit(main())
