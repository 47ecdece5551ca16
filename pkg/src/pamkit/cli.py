"""``pamkit`` command line.

Exit codes: 0 success, 1 computation error, 2 usage or I/O error.
The default output directory comes from ``$PAMKIT_OUT`` (else ``./pamkit-out``).
"""

from __future__ import annotations

import argparse
import hashlib
import json
import logging
import os
import platform
import sys
import time
from importlib import metadata
from pathlib import Path

from . import graphclass, relpred
from .errors import ParseError, PamError, VocabularyError
from .graph_io import load_triples, load_tudataset
from .mtx import write_pam, write_symmetric_dense
from .pam import build_pam, col_profile, compute_powers, row_profile, thread_count, value_histogram
from .primes import build_mapping, factorize_cell, load_mapping, save_mapping

log = logging.getLogger("pamkit")

OUT_ENV = "PAMKIT_OUT"


class UsageError(Exception):
    pass


def _sha256(path: Path) -> str:
    h = hashlib.sha256()
    with path.open("rb") as fh:
        for block in iter(lambda: fh.read(1 << 20), b""):
            h.update(block)
    return h.hexdigest()


def _versions() -> dict:
    out = {"python": platform.python_version()}
    for pkg in ("pamkit", "numpy", "scipy", "numba", "scikit-learn"):
        try:
            out[pkg] = metadata.version(pkg)
        except metadata.PackageNotFoundError:
            out[pkg] = None
    return out


def _inputs(*paths) -> list[dict]:
    out = []
    for p in paths:
        if p is None:
            continue
        p = Path(p)
        if p.is_dir():
            out.append({"path": str(p), "files": {f.name: _sha256(f) for f in sorted(p.iterdir()) if f.is_file()}})
        else:
            out.append({"path": str(p), "sha256": _sha256(p)})
    return out


def _config(args) -> dict:
    skip = {"func", "verbose"}
    return {k: v for k, v in sorted(vars(args).items()) if k not in skip}


def _dump(obj, path: Path) -> None:
    path.write_text(json.dumps(obj, indent=2, sort_keys=True) + "\n", encoding="utf-8")


def _out_dir(args) -> Path:
    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    return out


def _manifest(args, inputs, **extra) -> dict:
    return {"command": args.command, "config": _config(args), "seed": args.seed,
            "inputs": inputs, "versions": _versions(), **extra}


def _load_graph(args):
    return load_triples(args.triples, directed=not args.undirected)


def _mapping_for(graph, args):
    return build_mapping(graph.relation_count, skip_two=args.skip_two, names=graph.relation_names)


def cmd_build(args) -> int:
    graph = _load_graph(args)
    mapping = _mapping_for(graph, args)
    out = _out_dir(args)
    product = build_pam(graph, mapping, "product", args.scalar)
    plus = build_pam(graph, mapping, "sum", args.scalar)
    write_pam(product, out / "P.mtx")
    write_pam(plus, out / "P_plus.mtx")
    save_mapping(mapping, out / "mapping.tsv")
    (out / "entities.tsv").write_text(
        "".join(f"{name}\t{i}\n" for i, name in enumerate(graph.node_names)), encoding="utf-8"
    )
    _dump(
        _manifest(
            args,
            _inputs(args.triples),
            N=graph.node_count,
            R=graph.relation_count,
            edges=graph.edge_count,
            duplicates_dropped=graph.duplicates,
            nnz={"product": product.nnz, "sum": plus.nnz},
            primes=list(mapping.primes),
        ),
        out / "manifest.json",
    )
    print(f"N={graph.node_count} R={graph.relation_count} edges={graph.edge_count} nnz={product.nnz} -> {out}")
    return 0


def cmd_power(args) -> int:
    graph = _load_graph(args)
    mapping = _mapping_for(graph, args)
    out = _out_dir(args)
    t0 = time.perf_counter()
    base = build_pam(graph, mapping, args.agg, args.scalar)
    build_time = time.perf_counter() - t0
    stack = compute_powers(base, args.hops, threads=args.threads, density_fraction=args.density, mapping=mapping)
    if not args.no_matrices:
        for m in stack:
            write_pam(m, out / f"P{m.hop}.mtx")
    save_mapping(mapping, out / "mapping.tsv")
    timing = {"build_seconds": build_time, "hop_seconds": list(stack.timings),
              "total_seconds": build_time + sum(stack.timings)}
    _dump(
        _manifest(args, _inputs(args.triples), N=graph.node_count, R=graph.relation_count,
                  stack=stack.manifest(), timing=timing),
        out / "manifest.json",
    )
    for m, secs in zip(stack, stack.timings):
        print(f"hop {m.hop}: nnz={m.nnz} time={secs:.3f}s")
    if stack.overflow_hop is not None:
        print(f"warning: values exceed 2^53 from hop {stack.overflow_hop}", file=sys.stderr)
    if stack.density_hops:
        hops = ",".join(map(str, stack.density_hops))
        print(f"warning: hops {hops} exceed {args.density:g} N^2 non-zeros", file=sys.stderr)
    return 0


def _parse_value(text: str) -> int:
    try:
        return int(text)
    except ValueError:
        f = float(text)
        if not f.is_integer():
            raise ValueError(f"{text} is not an integer cell value") from None
        return int(f)


def cmd_factorize(args) -> int:
    mapping = load_mapping(args.mapping)
    try:
        value = _parse_value(args.value)
    except ValueError as exc:
        raise UsageError(str(exc)) from None
    result = factorize_cell(value, mapping)
    names = mapping.names
    relations = {names[r]: c for r, c in sorted(result.relations.items())}
    print(json.dumps({"value": value, "relations": relations, "residue": result.residue,
                      "complete": result.complete}, sort_keys=True))
    return 0


def cmd_stats(args) -> int:
    graph = _load_graph(args)
    mapping = _mapping_for(graph, args)
    stack = compute_powers(build_pam(graph, mapping, args.agg, args.scalar), args.hops, threads=args.threads)
    report = {"N": graph.node_count, "R": graph.relation_count, "primes": list(mapping.primes), "hops": []}
    for m in stack:
        hist = value_histogram(m)
        report["hops"].append({"hop": m.hop, "nnz": m.nnz, "histogram": {str(k): v for k, v in hist.items()}})
    if args.node is not None:
        idx = graph.node_index()
        if args.node not in idx:
            raise VocabularyError(args.node, "node")
        i = idx[args.node]
        report["node"] = {
            "name": args.node,
            "outgoing": [dict(zip(("count", "values"), row_profile(m, i))) for m in stack],
            "incoming": [dict(zip(("count", "values"), col_profile(m, i))) for m in stack],
        }
    text = json.dumps(report, indent=2, sort_keys=True)
    print(text)
    if args.save:
        out = _out_dir(args)
        (out / "stats.json").write_text(text + "\n", encoding="utf-8")
    return 0


def cmd_relpred(args) -> int:
    train = load_triples(args.train)
    mapping = build_mapping(train.relation_count, skip_two=args.skip_two, names=train.relation_names)
    stack = compute_powers(build_pam(train, mapping, "sum", args.scalar), args.hops, threads=args.threads)
    index = relpred.build_index(stack, train, one_hot=args.one_hot)
    test = load_triples(args.test, vocab=train, on_unknown="skip")
    extra = {}
    k = args.k_neighbors
    if k is None and args.valid:
        valid = load_triples(args.valid, vocab=train, on_unknown="skip")
        k, scores = relpred.select_k_neighbors(index, stack, valid, exclude_self=args.exclude_self,
                                               threads=args.threads)
        extra["validation_mrr"] = {str(c): v for c, v in scores.items()}
    if k is None:
        k = relpred.DEFAULT_K_NEIGHBORS
    cutoffs = [int(c) for c in args.cutoffs.split(",")]
    t0 = time.perf_counter()
    report = relpred.evaluate(index, stack, test, k, cutoffs, exclude_self=args.exclude_self, threads=args.threads)
    elapsed = time.perf_counter() - t0
    out = _out_dir(args)
    result = report.to_dict()
    _dump(result, out / "report.json")
    targets = {}
    if args.expect_mrr is not None:
        targets["mrr"] = {"bound": args.expect_mrr, "met": report.mrr >= args.expect_mrr}
    if args.expect_hits3 is not None:
        h3 = report.hits.get(3)
        targets["hits@3"] = {"bound": args.expect_hits3, "met": h3 is not None and h3 >= args.expect_hits3}
    _dump(
        _manifest(args, _inputs(args.train, args.valid, args.test), report=result, stack=stack.manifest(),
                  eval_seconds=elapsed, targets=targets, **extra),
        out / "manifest.json",
    )
    print(json.dumps(result, sort_keys=True))
    return 0


def cmd_graphclass(args) -> int:
    collection = load_tudataset(args.dataset)
    mapping = build_mapping(len(collection.relation_names), skip_two=args.skip_two)
    gammas = [float(g) for g in args.gammas.split(",")]
    kernels: dict
    if args.kernel in ("pp", "pp-vh"):
        feats = graphclass.graph_features(collection.graphs, mapping, args.hops, args.scalar)
        vh = None
        if args.kernel == "pp-vh":
            vh = graphclass.vertex_histogram_kernel(collection.graphs, len(collection.node_label_names))
        kernels = graphclass.kernel_grid(feats, gammas, vh)
    else:
        kernels = {None: graphclass.vertex_histogram_kernel(collection.graphs, len(collection.node_label_names))}
    report = graphclass.evaluate_classification(
        kernels, collection.graph_labels, args.outer_folds, args.inner_folds, args.seed
    )
    out = _out_dir(args)
    result = {"dataset": collection.name, "kernel": args.kernel, **report.to_dict()}
    result["params"].update(hops=args.hops, gammas=gammas if args.kernel != "vh" else [],
                            c_grid=list(graphclass.C_GRID))
    _dump(result, out / "report.json")
    if args.save_kernels:
        for key, k in kernels.items():
            suffix = "" if key is None else f"_gamma{key:g}"
            write_symmetric_dense(k.values, out / f"kernel_{args.kernel}{suffix}.mtx")
    _dump(_manifest(args, _inputs(args.dataset), report=result), out / "manifest.json")
    print(json.dumps({k: result[k] for k in ("dataset", "kernel", "mean", "std")}, sort_keys=True))
    return 0


def build_parser() -> argparse.ArgumentParser:
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--hops", type=int, default=5, help="maximum power k (default 5)")
    common.add_argument("--scalar", choices=("int", "float"), default="float")
    common.add_argument("--agg", choices=("product", "sum"), default="sum")
    common.add_argument("--skip-two", action=argparse.BooleanOptionalAction, default=True,
                        help="map relations to odd primes only (default on)")
    common.add_argument("--seed", type=int, default=0)
    common.add_argument("--threads", type=int, default=None, help="worker threads (default: all cores)")
    common.add_argument("--out", default=os.environ.get(OUT_ENV, "pamkit-out"),
                        help=f"output directory (default ${OUT_ENV} or ./pamkit-out)")
    common.add_argument("-v", "--verbose", action="store_true")

    parser = argparse.ArgumentParser(prog="pamkit", description="Prime Adjacency Matrix toolkit")
    sub = parser.add_subparsers(dest="command", required=True, metavar="COMMAND")

    p = sub.add_parser("build", parents=[common], help="one-hop PAMs (P and P+) as Matrix Market")
    p.add_argument("triples")
    p.add_argument("--undirected", action="store_true")
    p.set_defaults(func=cmd_build)

    p = sub.add_parser("power", parents=[common], help="PAM powers P^1..P^k with timings")
    p.add_argument("triples")
    p.add_argument("--undirected", action="store_true")
    p.add_argument("--density", type=float, default=0.5, help="density warning threshold as a fraction of N^2")
    p.add_argument("--no-matrices", action="store_true", help="write the manifest only")
    p.set_defaults(func=cmd_power)

    p = sub.add_parser("factorize", parents=[common], help="decompose a one-hop cell value")
    p.add_argument("value")
    p.add_argument("--mapping", required=True, help="relation<TAB>prime file")
    p.set_defaults(func=cmd_factorize)

    p = sub.add_parser("stats", parents=[common], help="value histograms and node profiles per hop")
    p.add_argument("triples")
    p.add_argument("--undirected", action="store_true")
    p.add_argument("--node", help="also print row/column profiles of this node")
    p.add_argument("--save", action="store_true", help="also write stats.json to --out")
    p.set_defaults(func=cmd_stats)

    p = sub.add_parser("relpred", parents=[common], help="nearest-neighbour relation prediction")
    p.add_argument("--train", required=True)
    p.add_argument("--test", required=True)
    p.add_argument("--valid", help="validation split used to choose --k-neighbors")
    p.add_argument("--k-neighbors", type=int, default=None)
    p.add_argument("--cutoffs", default="1,3,10")
    p.add_argument("--exclude-self", action="store_true")
    p.add_argument("--one-hot", action="store_true", help="explicit one-hot distances (slower, same result)")
    p.add_argument("--expect-mrr", type=float)
    p.add_argument("--expect-hits3", type=float)
    p.set_defaults(func=cmd_relpred)

    p = sub.add_parser("graphclass", parents=[common], help="nested-CV graph classification on a TUDataset")
    p.add_argument("dataset", help="TUDataset directory")
    p.add_argument("--kernel", choices=("pp", "vh", "pp-vh"), default="pp")
    p.add_argument("--gammas", default=",".join(f"{g:g}" for g in graphclass.GAMMA_GRID))
    p.add_argument("--outer-folds", type=int, default=5)
    p.add_argument("--inner-folds", type=int, default=3)
    p.add_argument("--save-kernels", action="store_true")
    p.set_defaults(func=cmd_graphclass, scalar="int")
    return parser


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING,
                        format="%(levelname)s %(name)s: %(message)s")
    if getattr(args, "hops", 1) < 1:
        parser.error("--hops must be >= 1")
    try:
        with thread_count(args.threads):
            return args.func(args)
    except (UsageError, OSError, ParseError, VocabularyError) as exc:
        print(f"pamkit: error: {exc}", file=sys.stderr)
        return 2
    except (PamError, ValueError, ArithmeticError, IndexError, MemoryError) as exc:
        print(f"pamkit: error: {exc}", file=sys.stderr)
        return 1


if __name__ == "__main__":
    sys.exit(main())
