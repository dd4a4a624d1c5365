"""Command-line front end tying the engine together.

Commands: generate, z, map, marginal, sample, baselines, sparse, bench,
count.  Structured artifacts are JSON, tables are CSV, and every run
appends one line to records.jsonl in the output directory.  Exit codes:
0 success, 2 invalid input, 1 internal error.
"""

from __future__ import annotations

import argparse
import csv
import json
import math
import statistics
import sys
import time
from collections import Counter
from dataclasses import replace
from pathlib import Path

from . import io as hio
from .baselines import beam_search_cluster, greedy_cluster
from .core import GroundSet, mask_of, num_hierarchies, split_term_count
from .datasets import random_similarity_weights
from .jetgen import DEFAULT_LAM, DEFAULT_TCUT, JetConfig, generate_jet
from .models import (
    ConstantModel,
    DasguptaModel,
    FourVector,
    GinkgoModel,
    ModelParams,
    log_hierarchy_potential,
)
from .sparse import (
    LeafOrdering,
    SparseTrellis,
    build_beam_search_trellis,
    build_simulator_trellis,
)
from .trellis import DenseTrellis

SAMPLE_FILE_CAP = 2000  # above this, per-draw tree files collapse to distinct trees


def _model_arguments(parser: argparse.ArgumentParser) -> None:
    parser.add_argument("--model", default="constant", help="dasgupta|correlation|ginkgo|constant")
    parser.add_argument("--beta", type=float, default=1.0)
    parser.add_argument("--lambda", dest="lam", type=float, default=DEFAULT_LAM)
    parser.add_argument("--tcut", type=float, default=DEFAULT_TCUT)


def _common_arguments(parser: argparse.ArgumentParser) -> None:
    parser.add_argument("--seed", type=int, default=0)
    parser.add_argument("--out", default=".", help="output directory")


def _out_dir(args) -> Path:
    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    return out


def _record(args, out: Path, **fields) -> dict:
    record = {"command": args.command, "seed": args.seed, **fields}
    hio.append_record(out / "records.jsonl", record)
    return record


def _load_instance(args):
    ds = hio.load_dataset(args.data)
    params = ModelParams(beta=args.beta, lam=args.lam, t_cut=args.tcut)
    model = hio.build_model(ds, args.model, params)
    return ds, model, hio.file_sha256(args.data)


def _model_fields(args) -> dict:
    return {"model": args.model, "beta": args.beta, "lam": args.lam}


# ---------------------------------------------------------------------------
# inference commands


def cmd_z(args) -> int:
    out = _out_dir(args)
    ds, model, digest = _load_instance(args)
    start = time.perf_counter()
    trellis = DenseTrellis(ds.ground(), model)
    log_z = trellis.log_partition()
    log_map, _ = trellis.map_hierarchy()  # same pass fills both memos
    wall = time.perf_counter() - start
    _record(
        args, out, dataset_sha256=digest, **_model_fields(args),
        log_z=log_z, log_map=log_map, wall_time=wall,
        op_count=trellis.operation_count(),
    )
    print(f"n={ds.n} log_z={log_z:.12g} ops={trellis.operation_count()} wall={wall:.3f}s")
    return 0


def cmd_map(args) -> int:
    out = _out_dir(args)
    ds, model, digest = _load_instance(args)
    start = time.perf_counter()
    trellis = DenseTrellis(ds.ground(), model)
    log_z = trellis.log_partition()
    value, tree = trellis.map_hierarchy()
    wall = time.perf_counter() - start
    tree_path = out / args.tree_name
    hio.save_tree(tree, tree_path, model)
    _record(
        args, out, dataset_sha256=digest, **_model_fields(args),
        log_z=log_z, log_map=value, wall_time=wall,
        op_count=trellis.operation_count(), tree_file=tree_path.name,
    )
    print(f"n={ds.n} log_map={value:.12g} log_z={log_z:.12g} tree={tree_path}")
    if args.model == "dasgupta":
        print(f"cut_cost={-value / args.beta:.12g}")
    if value == float("-inf"):
        print("degenerate instance: every hierarchy has zero potential", file=sys.stderr)
    return 0


def cmd_marginal(args) -> int:
    out = _out_dir(args)
    ds, model, digest = _load_instance(args)
    trellis = DenseTrellis(ds.ground(), model)
    if (args.cluster is None) == (args.fragment is None):
        raise ValueError("pass exactly one of --cluster or --fragment")
    if args.cluster is not None:
        bits = mask_of(int(tok) for tok in args.cluster.split(","))
        value = trellis.marginal_cluster(bits)
        target = {"cluster": args.cluster}
    else:
        fragment = hio.load_tree(args.fragment)
        value = trellis.marginal_subhierarchy(fragment)
        target = {"fragment": Path(args.fragment).name}
    _record(
        args, out, dataset_sha256=digest, **_model_fields(args),
        log_z=trellis.log_partition(), log_marginal=value, **target,
    )
    print(f"log_marginal={value:.12g} (probability {math.exp(value):.6g})")
    return 0


def cmd_sample(args) -> int:
    out = _out_dir(args)
    ds, model, digest = _load_instance(args)
    trellis = DenseTrellis(ds.ground(), model)
    start = time.perf_counter()
    samples = trellis.sample_many(args.count, args.seed)
    wall = time.perf_counter() - start
    counts = Counter(h.signature() for h in samples)
    by_sig = {h.signature(): h for h in samples}
    ranked = counts.most_common()
    sample_dir = out / "samples"
    sample_dir.mkdir(exist_ok=True)
    if args.count <= SAMPLE_FILE_CAP:
        for k, h in enumerate(samples):
            hio.save_tree(h, sample_dir / f"sample_{k:05d}.json", model)
    else:
        for rank, (sig, _) in enumerate(ranked):
            hio.save_tree(by_sig[sig], sample_dir / f"distinct_{rank:04d}.json", model)
    csv_path = out / "sample_frequencies.csv"
    with open(csv_path, "w", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(["rank", "count", "frequency", "log_phi"])
        for rank, (sig, cnt) in enumerate(ranked):
            writer.writerow(
                [rank, cnt, cnt / args.count, log_hierarchy_potential(by_sig[sig], model)]
            )
    _record(
        args, out, dataset_sha256=digest, **_model_fields(args),
        log_z=trellis.log_partition(), draws=args.count,
        distinct=len(counts), wall_time=wall,
    )
    print(f"{args.count} draws, {len(counts)} distinct trees -> {csv_path}")
    return 0


# ---------------------------------------------------------------------------
# generation and corpus commands


def _parse_root(text: str) -> FourVector:
    parts = [float(tok) for tok in text.split(",")]
    if len(parts) != 4:
        raise ValueError("--root needs E,px,py,pz")
    return FourVector(*parts)


def cmd_generate(args) -> int:
    out = _out_dir(args)
    leaf_filter = None
    if args.min_leaves is not None or args.max_leaves is not None:
        if args.min_leaves is None or args.max_leaves is None:
            raise ValueError("pass both --min-leaves and --max-leaves or neither")
        leaf_filter = (args.min_leaves, args.max_leaves)
    config = JetConfig(
        root=_parse_root(args.root),
        lam=args.lam,
        t_cut=args.tcut,
        seed=args.seed,
        leaf_count_filter=leaf_filter,
    )
    start = time.perf_counter()
    files = []
    for i in range(args.count):
        jet = generate_jet(replace(config, seed=(args.seed, i)))
        name = f"jet_{i:05d}.json"
        hio.save_jet(jet, out / name)
        files.append({"file": name, "leaves": jet.num_leaves()})
    manifest = {
        "count": args.count,
        "seed": args.seed,
        "lam": args.lam,
        "t_cut": args.tcut,
        "root": [config.root.e, config.root.px, config.root.py, config.root.pz],
        "leaf_count_filter": list(leaf_filter) if leaf_filter else None,
        "jets": files,
    }
    (out / "manifest.json").write_text(json.dumps(manifest, indent=1, sort_keys=True))
    wall = time.perf_counter() - start
    _record(args, out, count=args.count, lam=args.lam, tcut=args.tcut, wall_time=wall)
    print(f"wrote {args.count} jets + manifest to {out}")
    return 0


def _load_corpus(path: str):
    manifest = json.loads((Path(path) / "manifest.json").read_text())
    return [hio.load_jet(Path(path) / entry["file"]) for entry in manifest["jets"]]


def cmd_baselines(args) -> int:
    out = _out_dir(args)
    if (args.corpus is None) == (args.data is None):
        raise ValueError("pass exactly one of --corpus or --data")
    instances = []
    if args.corpus is not None:
        for jet in _load_corpus(args.corpus):
            instances.append((GinkgoModel(jet.payloads, lam=args.lam), jet.num_leaves()))
        digest = hio.file_sha256(Path(args.corpus) / "manifest.json")
    else:
        ds, model, digest = _load_instance(args)
        instances.append((model, ds.n))
    rows = []
    start = time.perf_counter()
    for idx, (model, n) in enumerate(instances):
        g_score, _ = greedy_cluster(model)
        b_score, _ = beam_search_cluster(model, args.beam_width, args.lookahead)
        trellis = DenseTrellis(GroundSet(n), model)
        m_score, _ = trellis.map_hierarchy()
        rows.append([idx, n, g_score, b_score, m_score])
    wall = time.perf_counter() - start
    csv_path = out / "baselines.csv"
    with open(csv_path, "w", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(["instance", "n", "log_phi_greedy", "log_phi_beam", "log_phi_trellis"])
        writer.writerows(rows)
    gaps = {
        "trellis_minus_beam": [r[4] - r[3] for r in rows],
        "trellis_minus_greedy": [r[4] - r[2] for r in rows],
        "beam_minus_greedy": [r[3] - r[2] for r in rows],
    }
    summary = {
        name: {
            "mean": statistics.fmean(vals),
            "std": statistics.pstdev(vals) if len(vals) > 1 else 0.0,
        }
        for name, vals in gaps.items()
    }
    _record(
        args, out, dataset_sha256=digest, **_model_fields(args),
        instances=len(rows), wall_time=wall, summary=summary,
    )
    for name, stats in summary.items():
        print(f"{name}: {stats['mean']:.4f} +- {stats['std']:.4f}")
    print(f"per-instance table -> {csv_path}")
    return 0


def cmd_sparse(args) -> int:
    out = _out_dir(args)
    ordering = LeafOrdering(args.ordering, args.ordering_seed)
    if args.load_trellis:
        trellis = SparseTrellis.load(args.load_trellis)
    else:
        base = JetConfig(
            root=_parse_root(args.root), lam=args.lam, t_cut=args.tcut,
            seed=args.seed, leaf_count_filter=(args.n_leaves, args.n_leaves),
        )
        if args.builder == "sim":
            trellis = build_simulator_trellis(base, args.num_seeds, ordering)
        elif args.builder == "bs":
            payload_sets = [
                generate_jet(replace(base, seed=(args.seed, i))).payloads
                for i in range(args.num_seeds)
            ]
            trellis = build_beam_search_trellis(
                payload_sets, lambda p: GinkgoModel(p, lam=args.lam), ordering,
                args.beam_width, args.lookahead,
            )
        else:
            raise ValueError("--builder must be sim or bs")
    if args.save_trellis:
        trellis.save(args.save_trellis)
    sparsity = trellis.sparsity_index()
    print(
        f"trellis: {trellis.num_vertices()} vertices, {trellis.num_edges()} edges, "
        f"sparsity={float(sparsity):.3g} ({sparsity.numerator}/{sparsity.denominator})"
    )
    if not args.test_corpus:
        _record(
            args, out, vertices=trellis.num_vertices(), edges=trellis.num_edges(),
            sparsity=float(sparsity),
        )
        return 0
    jets = _load_corpus(args.test_corpus)
    rows = []
    for idx, jet in enumerate(jets):
        if jet.num_leaves() != trellis.ground.n:
            raise ValueError("test corpus leaf count does not match the trellis")
        payloads = (
            trellis.ordering.order_payloads(jet.payloads)
            if trellis.ordering is not None
            else list(jet.payloads)
        )
        model = GinkgoModel(payloads, lam=args.lam)
        sparse_map, _ = trellis.evaluate(model).map_hierarchy()
        greedy_score, _ = greedy_cluster(model)
        full_map, _ = DenseTrellis(GroundSet(model.n), model).map_hierarchy()
        rows.append([idx, sparse_map, greedy_score, full_map])
    csv_path = out / "sparse_eval.csv"
    with open(csv_path, "w", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(["instance", "log_phi_sparse_map", "log_phi_greedy", "log_phi_full_map"])
        writer.writerows(rows)
    mean_rel = statistics.fmean(r[1] - r[2] for r in rows)
    mean_full_rel = statistics.fmean(r[3] - r[2] for r in rows)
    _record(
        args, out, vertices=trellis.num_vertices(), edges=trellis.num_edges(),
        sparsity=float(sparsity), instances=len(rows),
        mean_sparse_map_minus_greedy=mean_rel, mean_full_map_minus_greedy=mean_full_rel,
    )
    print(f"mean(sparse MAP - greedy) = {mean_rel:.4f}")
    print(f"mean(full   MAP - greedy) = {mean_full_rel:.4f}")
    print(f"per-instance table -> {csv_path}")
    return 0


def cmd_bench(args) -> int:
    out = _out_dir(args)
    if args.n_min < 2 or args.n_max < args.n_min:
        raise ValueError("need 2 <= n-min <= n-max")
    rows = []
    prev_ops = None
    for n in range(args.n_min, args.n_max + 1):
        if args.model == "constant":
            model = ConstantModel(n)
        elif args.model == "dasgupta":
            model = DasguptaModel(random_similarity_weights(n, args.seed), beta=args.beta)
        elif args.model == "ginkgo":
            jet = generate_jet(
                JetConfig(seed=(args.seed, n), leaf_count_filter=(n, n), lam=args.lam)
            )
            model = GinkgoModel(jet.payloads, lam=args.lam)
        else:
            raise ValueError("bench supports constant, dasgupta or ginkgo")
        trellis = DenseTrellis(GroundSet(n), model)
        start = time.perf_counter()
        trellis.log_partition()
        wall_fill = time.perf_counter() - start
        start = time.perf_counter()
        trellis.map_hierarchy()
        wall_map = time.perf_counter() - start
        ops = trellis.operation_count()
        expected = split_term_count(n)
        if ops != expected:
            raise RuntimeError(f"op counter {ops} != closed form {expected} at n={n}")
        ratio = ops / prev_ops if prev_ops else float("nan")
        prev_ops = ops
        rows.append([n, ops, expected, ratio, wall_fill, wall_map])
    csv_path = out / "bench.csv"
    with open(csv_path, "w", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(["n", "ops", "ops_closed_form", "ops_ratio", "wall_fill_s", "wall_map_s"])
        writer.writerows(rows)
    _record(args, out, model=args.model, n_min=args.n_min, n_max=args.n_max)
    print(f"bench table -> {csv_path}")
    if args.n_max >= 8:
        final_ratio = rows[-1][3]
        if abs(final_ratio - 3.0) > 0.15:
            raise RuntimeError(f"op growth ratio {final_ratio:.3f} is not approaching 3")
        print(f"ops growth ratio at n={args.n_max}: {final_ratio:.4f} (target 3)")
    return 0


def cmd_count(args) -> int:
    out = _out_dir(args)
    if (args.n is None) == (args.data is None):
        raise ValueError("pass exactly one of --n or --data")
    if args.n is not None:
        n = args.n
    else:
        n = hio.load_dataset(args.data).n
    closed = num_hierarchies(n)
    trellis = DenseTrellis(GroundSet(n), ConstantModel(n))
    counted = trellis.count_trees()
    _record(args, out, n=n, hierarchies=str(counted))
    print(f"n={n}: {counted} hierarchies (closed form {closed})")
    return 0 if counted == closed else 1


# ---------------------------------------------------------------------------
# parser


def build_parser(config_defaults: dict | None = None) -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="hctrellis",
        description="Exact inference over binary hierarchical clusterings.",
    )
    parser.add_argument("--config", help="JSON file of default flag values")
    sub = parser.add_subparsers(dest="command", required=True)
    created = []

    def add(name, func, help_text):
        p = sub.add_parser(name, help=help_text)
        p.set_defaults(func=func)
        _common_arguments(p)
        created.append(p)
        return p

    p = add("z", cmd_z, "partition function of a dataset")
    p.add_argument("--data", required=True)
    _model_arguments(p)

    p = add("map", cmd_map, "best hierarchy of a dataset")
    p.add_argument("--data", required=True)
    p.add_argument("--tree-name", default="map_tree.json")
    _model_arguments(p)

    p = add("marginal", cmd_marginal, "posterior probability of a cluster or fragment")
    p.add_argument("--data", required=True)
    p.add_argument("--cluster", help="comma-separated leaf indices")
    p.add_argument("--fragment", help="tree file rooted at the cluster")
    _model_arguments(p)

    p = add("sample", cmd_sample, "exact posterior samples")
    p.add_argument("--data", required=True)
    p.add_argument("--count", type=int, default=1000)
    _model_arguments(p)

    p = add("generate", cmd_generate, "write a corpus of toy jets")
    p.add_argument("--count", type=int, default=1)
    p.add_argument("--root", default="100,0,0,80")
    p.add_argument("--lambda", dest="lam", type=float, default=DEFAULT_LAM)
    p.add_argument("--tcut", type=float, default=DEFAULT_TCUT)
    p.add_argument("--min-leaves", type=int)
    p.add_argument("--max-leaves", type=int)

    p = add("baselines", cmd_baselines, "greedy vs beam vs exact MAP")
    p.add_argument("--corpus", help="directory written by generate")
    p.add_argument("--data", help="single dataset file")
    p.add_argument("--beam-width", type=int)
    p.add_argument("--lookahead", type=int, default=1)
    _model_arguments(p)

    p = add("sparse", cmd_sparse, "build / evaluate a sparse trellis")
    p.add_argument("--builder", default="sim", help="sim|bs")
    p.add_argument("--n-leaves", type=int, default=9)
    p.add_argument("--num-seeds", type=int, default=10)
    p.add_argument("--ordering", default="norm_ascending")
    p.add_argument("--ordering-seed", type=int)
    p.add_argument("--root", default="100,0,0,80")
    p.add_argument("--lambda", dest="lam", type=float, default=DEFAULT_LAM)
    p.add_argument("--tcut", type=float, default=DEFAULT_TCUT)
    p.add_argument("--beam-width", type=int)
    p.add_argument("--lookahead", type=int, default=1)
    p.add_argument("--save-trellis")
    p.add_argument("--load-trellis")
    p.add_argument("--test-corpus")

    p = add("bench", cmd_bench, "operation counts and wall times vs n")
    p.add_argument("--n-min", type=int, default=2)
    p.add_argument("--n-max", type=int, default=10)
    _model_arguments(p)

    p = add("count", cmd_count, "number of hierarchies over n leaves")
    p.add_argument("--n", type=int)
    p.add_argument("--data")

    if config_defaults:
        # set after all arguments exist: a config file then overrides the
        # built-in defaults but never an explicitly passed flag
        for p in created:
            p.set_defaults(**config_defaults)

    return parser


def main(argv=None) -> int:
    argv = list(sys.argv[1:] if argv is None else argv)
    config_defaults = None
    if "--config" in argv:
        idx = argv.index("--config")
        try:
            config_defaults = json.loads(Path(argv[idx + 1]).read_text())
        except (IndexError, OSError, json.JSONDecodeError) as exc:
            print(f"error: bad config file: {exc}", file=sys.stderr)
            return 2
    parser = build_parser(config_defaults)
    try:
        args = parser.parse_args(argv)
        return args.func(args)
    except (ValueError, FileNotFoundError, KeyError, json.JSONDecodeError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2
    except Exception as exc:  # internal failure
        print(f"internal error: {exc}", file=sys.stderr)
        return 1


if __name__ == "__main__":
    sys.exit(main())
