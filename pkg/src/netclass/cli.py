"""``netclass`` command line: simulate, featurize, train, predict, explain.

Exit codes: 0 success, 1 some inputs failed (partial output written),
2 usage or configuration error (nothing written).
"""

from __future__ import annotations

import argparse
import logging
import os
import sys
from pathlib import Path

import numpy as np

from . import explain, io, pipeline
from .features import FEATURE_NAMES
from .gbt import Hyperparams, ModelFormatError, load_model
from .generators import CLASS_NAMES, ModelClass, ParameterError, desk_manifest
from .graph import GraphInputError

log = logging.getLogger("netclass")

EXIT_OK, EXIT_PARTIAL, EXIT_USAGE = 0, 1, 2


class UsageError(Exception):
    pass


def _jobs(args) -> int:
    if args.jobs is not None:
        return args.jobs
    env = os.environ.get("NETCLASS_JOBS")
    if env is None:
        return 1
    try:
        return max(int(env), 1)
    except ValueError:
        raise UsageError(f"NETCLASS_JOBS must be an integer, got {env!r}") from None


def _out_dir(args) -> Path:
    out = Path(args.out)
    if out.exists() and not out.is_dir():
        raise UsageError(f"--out {out} exists and is not a directory")
    return out


def _feature_index(name: str) -> int:
    if name in FEATURE_NAMES:
        return FEATURE_NAMES.index(name)
    raise UsageError(f"unknown feature {name!r}; valid names: {', '.join(FEATURE_NAMES)}")


# -- subcommands ---------------------------------------------------------------------------

def cmd_simulate(args) -> int:
    if args.manifest:
        try:
            man = io.read_manifest(args.manifest)
        except OSError as exc:
            raise UsageError(f"cannot read manifest: {exc}") from None
        except io.FormatError as exc:
            raise UsageError(str(exc)) from None
        if args.seed is not None:
            man.seed = args.seed
    else:
        man = desk_manifest(seed=20241015 if args.seed is None else args.seed)
    out = _out_dir(args)
    n = pipeline.write_corpus(man, out, jobs=_jobs(args))
    print(f"simulated {n} graphs into {out}")
    return EXIT_OK


def cmd_featurize(args) -> int:
    corpus = Path(args.corpus)
    if not (corpus / "index.csv").is_file():
        raise UsageError(f"{corpus}/index.csv not found")
    try:
        table = pipeline.featurize_corpus(corpus, jobs=_jobs(args))
    except io.FormatError as exc:
        raise UsageError(str(exc)) from None
    out = Path(args.out)
    io.write_features(out, table.ids, table.classes, table.X)
    err_path = out.with_name(out.stem + "_errors.csv")
    if table.errors:
        io.write_csv(err_path, ("graph_id", "error"), table.errors)
        print(f"{len(table.errors)} graphs failed; see {err_path}", file=sys.stderr)
    print(f"wrote {len(table.ids)} feature rows to {out}")
    return EXIT_PARTIAL if table.errors else EXIT_OK


def cmd_train(args) -> int:
    seed = 0 if args.seed is None else args.seed
    if args.kfold < 0 or args.kfold == 1 or (args.search > 0 and args.kfold < 2):
        raise UsageError("--kfold must be 0 (no CV) or >= 2, and >= 2 with --search")
    if args.search < 0 or args.repeats < 1:
        raise UsageError("--search must be >= 0 and --repeats >= 1")
    try:
        d = io.read_features(args.features)
    except OSError as exc:
        raise UsageError(f"cannot read features: {exc}") from None
    except io.FormatError as exc:
        raise UsageError(str(exc)) from None
    try:
        hp = Hyperparams.from_overrides(args.hp, Hyperparams(seed=pipeline.named_seed(seed, "train")))
    except ValueError as exc:
        raise UsageError(str(exc)) from None
    out = _out_dir(args)
    res = pipeline.run_training(d, seed=seed, hp=hp, search=args.search, k=args.kfold,
                                repeats=args.repeats, jobs=_jobs(args))
    pipeline.write_training_outputs(res, out)
    r = res.report
    print(f"test accuracy {r.accuracy:.4f}  macro AUC {r.auc:.4f}")
    for c, p, rc in zip(r.classes, r.precision, r.recall):
        print(f"  {CLASS_NAMES[c]:>4}  precision {p:.4f}  recall {rc:.4f}")
    print(f"artifacts in {out}")
    return EXIT_OK


def _load_model(path):
    try:
        return load_model(path)
    except OSError as exc:
        raise UsageError(f"cannot read model: {exc}") from None
    except ModelFormatError as exc:
        raise UsageError(f"{path}: {exc}") from None


def cmd_predict(args) -> int:
    model = _load_model(args.model)
    src = Path(args.input)
    try:
        if src.suffix.lower() == ".csv":
            ids, _, X = io.read_features(src, require_labels=False)
        else:
            ids, X = [src.stem], pipeline.features_from_edge_list(src)
    except OSError as exc:
        raise UsageError(f"cannot read input: {exc}") from None
    except (io.FormatError, GraphInputError) as exc:
        raise UsageError(str(exc)) from None
    header = pipeline.prediction_header(model)
    rows = list(pipeline.prediction_rows(model, ids, X))
    print(",".join(header))
    for r in rows:
        print(",".join(io.fmt(v) for v in r))
    if args.out:
        io.write_csv(args.out, header, rows)
    return EXIT_OK


def _model_class(model, name):
    if name is None:
        return list(model.classes)
    try:
        c = int(ModelClass.parse(name))
    except ValueError as exc:
        raise UsageError(str(exc)) from None
    if c not in model.classes:
        raise UsageError(f"class {name} is not in the model")
    return [c]


def cmd_explain(args) -> int:
    model = _load_model(args.model)
    try:
        ids, _, X = io.read_features(args.features, require_labels=False)
    except OSError as exc:
        raise UsageError(f"cannot read features: {exc}") from None
    except io.FormatError as exc:
        raise UsageError(str(exc)) from None
    # resolve every name before any heavy work
    dep = _feature_index(args.dependence) if args.dependence else None
    color = _feature_index(args.color) if args.color else None
    pair = [_feature_index(f) for f in args.interact2d] if args.interact2d else None
    pd_feats = [_feature_index(f) for f in args.pd] if args.pd else None
    if args.waterfall and args.waterfall not in ids:
        raise UsageError(f"graph id {args.waterfall!r} not found in {args.features}")
    classes = _model_class(model, args.model_class)
    seed = 0 if args.seed is None else args.seed
    out = _out_dir(args)
    names = model.feature_names
    written = []

    phi = base = None
    if args.summary or dep is not None:
        summary = explain.shap_global_summary(model, X)
        phi, base = summary.phi, summary.base
    if args.summary:
        rows = [(CLASS_NAMES[c], f, v, r) for c, f, v, r in summary.rows()]
        io.write_csv(out / "shap_summary.csv", ("class", "feature", "mean_abs_shap", "rank"), rows)
        per = ([gid, CLASS_NAMES[c], base[ci], *phi[i, ci]]
               for i, gid in enumerate(ids) for ci, c in enumerate(model.classes))
        io.write_csv(out / "shap_values.csv", ("graph_id", "class", "base") + tuple(names), per)
        written += ["shap_summary.csv", "shap_values.csv"]
    if dep is not None:
        tables = explain.shap_dependence(model, X, dep, color, phi=phi)
        header = ("graph_id", "class", "value", "phi") + (("color_value",) if color is not None else ())
        rows = ([gid, CLASS_NAMES[c], *row] for c in classes for gid, row in zip(ids, tables[c]))
        fname = f"dependence_{names[dep]}.csv"
        io.write_csv(out / fname, header, rows)
        written.append(fname)
    if args.waterfall:
        i = ids.index(args.waterfall)
        exps = explain.tree_shap(model, X[i])
        rows = []
        for e in exps:
            if e.model_class not in classes:
                continue
            order = np.argsort(-np.abs(e.phi), kind="stable")
            rows += [[CLASS_NAMES[e.model_class], names[j], X[i, j], e.phi[j], e.base_value, e.prediction]
                     for j in order]
        fname = f"waterfall_{args.waterfall}.csv"
        io.write_csv(out / fname, ("class", "feature", "value", "phi", "base", "margin"), rows)
        written.append(fname)
    if args.hstats:
        rows = []
        for c in classes:
            rep = explain.h_statistics(model, c, X, max_order=args.order, sample_size=args.sample,
                                       seed=pipeline.named_seed(seed, "hstats"))
            rows += [(CLASS_NAMES[c], o, f, h) for _, o, f, h in rep.rows(names)]
        io.write_csv(out / "hstats.csv", ("class", "order", "features", "h2"), rows)
        written.append("hstats.csv")
    if pair:
        rows = []
        for c in classes:
            s = explain.interaction_2d(model, c, pair[0], pair[1], X, bins=args.bins)
            rows += [(CLASS_NAMES[c], *r) for r in s.records()]
        fname = f"interact2d_{names[pair[0]]}_{names[pair[1]]}.csv"
        io.write_csv(out / fname, ("class", names[pair[0]], names[pair[1]], "mean_proba", "count"), rows)
        written.append(fname)
    if pd_feats:
        rows = []
        try:
            for c in classes:
                p = explain.partial_dependence(model, c, pd_feats, X, grid_size=args.bins)
                rows += [(CLASS_NAMES[c], *pt, v) for pt, v in p.records()]
        except ValueError as exc:
            raise UsageError(str(exc)) from None
        fname = "pd_" + "_".join(names[f] for f in pd_feats) + ".csv"
        io.write_csv(out / fname, ("class",) + tuple(names[f] for f in pd_feats) + ("pd",), rows)
        written.append(fname)
    if not written:
        raise UsageError("nothing to do; pass --summary, --dependence, --waterfall, --hstats, "
                         "--interact2d or --pd")
    print("wrote " + ", ".join(str(out / w) for w in written))
    return EXIT_OK


# -- parser ----------------------------------------------------------------------------------

def build_parser() -> argparse.ArgumentParser:
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--seed", type=int, default=None, help="master seed")
    common.add_argument("--jobs", type=int, default=None,
                        help="worker processes (default: $NETCLASS_JOBS or 1)")
    common.add_argument("-v", "--verbose", action="store_true")

    p = argparse.ArgumentParser(prog="netclass", description=__doc__.splitlines()[0])
    sub = p.add_subparsers(dest="command", required=True)

    s = sub.add_parser("simulate", parents=[common], help="simulate a graph corpus")
    s.add_argument("--manifest", help="YAML manifest (default: built-in desk manifest)")
    s.add_argument("--out", required=True, help="corpus directory")
    s.set_defaults(func=cmd_simulate)

    s = sub.add_parser("featurize", parents=[common], help="compute the feature table of a corpus")
    s.add_argument("corpus", help="corpus directory with index.csv")
    s.add_argument("--out", required=True, help="feature CSV path")
    s.set_defaults(func=cmd_featurize)

    s = sub.add_parser("train", parents=[common], help="split, tune, train and evaluate")
    s.add_argument("features", help="feature CSV")
    s.add_argument("--out", required=True, help="output directory")
    s.add_argument("--hp", action="append", default=[], metavar="KEY=VALUE",
                   help="hyperparameter override (repeatable)")
    s.add_argument("--search", type=int, default=0, metavar="N",
                   help="evaluate N Latin-hypercube configurations by CV")
    s.add_argument("--kfold", type=int, default=10, metavar="K", help="CV folds (0 disables CV)")
    s.add_argument("--repeats", type=int, default=1, metavar="R", help="CV repeats")
    s.set_defaults(func=cmd_train)

    s = sub.add_parser("predict", parents=[common], help="classify graphs with a trained model")
    s.add_argument("--model", required=True)
    s.add_argument("input", help="edge-list file or feature CSV (*.csv)")
    s.add_argument("--out", help="also write the predictions to this CSV")
    s.set_defaults(func=cmd_predict)

    s = sub.add_parser("explain", parents=[common], help="SHAP, partial dependence and H-statistics")
    s.add_argument("--model", required=True)
    s.add_argument("features", help="feature CSV")
    s.add_argument("--out", required=True, help="output directory")
    s.add_argument("--class", dest="model_class", help="restrict to one class (default: all)")
    s.add_argument("--summary", action="store_true", help="global SHAP summary and per-row table")
    s.add_argument("--dependence", metavar="F", help="SHAP dependence table for feature F")
    s.add_argument("--color", metavar="G", help="colour feature for --dependence")
    s.add_argument("--waterfall", metavar="ID", help="per-feature SHAP of one graph")
    s.add_argument("--hstats", action="store_true", help="H-statistics")
    s.add_argument("--order", type=int, choices=(1, 2, 3), default=3, help="highest H order")
    s.add_argument("--sample", type=int, default=500, help="H-statistic sample size")
    s.add_argument("--interact2d", nargs=2, metavar=("F", "G"), help="binned 2-D probability surface")
    s.add_argument("--pd", nargs="+", metavar="F", help="partial dependence over 1-3 features")
    s.add_argument("--bins", type=int, default=20, help="grid size for --interact2d and --pd")
    s.set_defaults(func=cmd_explain)
    return p


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING,
                        format="%(levelname)s %(name)s: %(message)s")
    try:
        if args.jobs is not None and args.jobs < 1:
            raise UsageError("--jobs must be >= 1")
        return args.func(args)
    except UsageError as exc:
        print(f"netclass {args.command}: error: {exc}", file=sys.stderr)
        return EXIT_USAGE
    except ParameterError as exc:
        print(f"netclass {args.command}: error: {exc}", file=sys.stderr)
        return EXIT_USAGE


if __name__ == "__main__":
    sys.exit(main())
