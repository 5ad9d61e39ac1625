"""Command-line entry point: synth, identify, decompose, train.

Exit codes: 0 on success, 1 on pipeline, backend or numeric failure, 2 on
usage errors (bad flags, inconsistent options, invalid configuration).
"""
from __future__ import annotations

import argparse
import csv
import hashlib
import json
import logging
import math
import sys
import time
from dataclasses import asdict, dataclass, field
from pathlib import Path

import numpy as np

from . import __version__
from .embed import load_embeddings
from .errors import ConfigError, PipelineError, SemEdgeError
from .experiment import default_features, run_seed
from .graph import SynthConfig, load_graph, save_graph, synth_planted_graph
from .llm.gateway import BACKEND_KINDS, BackendConfig, Gateway
from .relations import EdgeDecomposition, RelationSet

logger = logging.getLogger("semedge")

MODES = ("full", "efficient", "random", "distance")


class UsageError(Exception):
    pass


@dataclass
class RunManifest:
    command: str
    config_digest: str
    inputs: dict[str, str] = field(default_factory=dict)
    outputs: list[str] = field(default_factory=list)
    seeds: list[int] = field(default_factory=list)
    timings: dict[str, float] = field(default_factory=dict)
    backend: str | None = None
    queries: dict = field(default_factory=dict)
    version: str = __version__

    def write(self, path) -> None:
        path = Path(path)
        self.outputs.append(str(path))
        path.write_text(json.dumps(asdict(self), indent=2, sort_keys=True) + "\n")


def _file_sha(path) -> str:
    return hashlib.sha256(Path(path).read_bytes()).hexdigest()


def config_digest(command: str, args: argparse.Namespace, inputs: dict[str, str]) -> str:
    """sha256 over the command, its non-output options and the input file contents."""
    opts = {k: v for k, v in sorted(vars(args).items())
            if k not in ("func", "out", "report", "audit", "manifest", "log_level", "transcripts")}
    payload = {"command": command, "options": opts,
               "inputs": {k: _file_sha(p) for k, p in sorted(inputs.items()) if Path(p).is_file()}}
    return hashlib.sha256(json.dumps(payload, sort_keys=True, default=str).encode()).hexdigest()


# backend plumbing ---------------------------------------------------------

def _add_backend_flags(p: argparse.ArgumentParser) -> None:
    g = p.add_argument_group("completion backend")
    g.add_argument("--backend", choices=BACKEND_KINDS, default="scripted")
    g.add_argument("--fixture", help="scripted answers JSON (digest -> role -> answer)")
    g.add_argument("--oracle", help="ground-truth decomposition JSONL for the oracle backend")
    g.add_argument("--p-noise", type=float, default=0.0, help="oracle answer corruption rate")
    g.add_argument("--endpoint", help="chat-completions URL for the http backend")
    g.add_argument("--model", default="default")
    g.add_argument("--temperature", type=float, default=0.2)
    g.add_argument("--max-retries", type=int, default=2)
    g.add_argument("--cache-dir", help="on-disk response cache directory")
    g.add_argument("--backend-seed", type=int, default=0)


def _backend_config(args, num_relations=None) -> BackendConfig:
    if args.backend == "oracle" and not args.oracle:
        raise UsageError("--backend oracle needs --oracle")
    if args.backend == "scripted" and not args.fixture:
        raise UsageError("--backend scripted needs --fixture")
    return BackendConfig(kind=args.backend, endpoint=args.endpoint, model=args.model,
                         temperature=args.temperature, max_retries=args.max_retries,
                         p_noise=args.p_noise, oracle_path=args.oracle, fixture_path=args.fixture,
                         cache_dir=args.cache_dir, seed=args.backend_seed, num_relations=num_relations)


def _manifest_path(args, default: Path) -> Path:
    return Path(args.manifest) if getattr(args, "manifest", None) else default


# commands -----------------------------------------------------------------

def cmd_synth(args) -> int:
    t0 = time.perf_counter()
    config = SynthConfig(n=args.n, k=args.k, r=2, degree=args.deg, p_text=args.noise, seed=args.seed)
    graph, oracle = synth_planted_graph(config)
    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    save_graph(graph, out / "graph.json")
    oracle.save(out / "oracle.jsonl", graph.edges)
    manifest = RunManifest("synth", config_digest("synth", args, {}), seeds=[args.seed],
                           outputs=[str(out / "graph.json"), str(out / "oracle.jsonl")])
    manifest.timings["total_s"] = time.perf_counter() - t0
    manifest.write(_manifest_path(args, out / "manifest.json"))
    print(f"wrote {graph.node_count} nodes, {graph.num_edges} edges to {out}")
    return 0


def cmd_identify(args) -> int:
    from .pipeline import identify_relations

    t0 = time.perf_counter()
    graph = load_graph(args.graph)
    gateway = Gateway(_backend_config(args), graph=graph)
    gateway.transcript = []
    out = Path(args.out)
    transcripts = Path(args.transcripts) if args.transcripts else out.with_suffix(".transcripts.jsonl")
    try:
        rs = identify_relations(gateway, graph.meta, skip_discriminator=args.skip_discriminator)
    except PipelineError as exc:
        _write_transcripts(gateway.transcript, transcripts)
        raise PipelineError(f"{exc} (transcripts: {transcripts})") from exc
    finally:
        _write_transcripts(gateway.transcript, transcripts)
    rs.save(out)
    inputs = {"graph": args.graph}
    if args.fixture:
        inputs["fixture"] = args.fixture
    manifest = RunManifest("identify", config_digest("identify", args, inputs), inputs=inputs,
                           outputs=[str(out), str(transcripts)], backend=gateway.backend.kind,
                           queries=gateway.stats())
    manifest.timings["total_s"] = time.perf_counter() - t0
    manifest.write(_manifest_path(args, out.with_suffix(".manifest.json")))
    print(f"{len(rs)} relation types -> {out}")
    for line in rs.enumerated().splitlines():
        print("  " + line)
    return 0


def _write_transcripts(entries, path: Path) -> None:
    with open(path, "w") as fh:
        for e in entries or []:
            fh.write(json.dumps(e, sort_keys=True) + "\n")


def _write_audit(dec: EdgeDecomposition, path: Path) -> None:
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(["node", "edge", "cached"])
        for q in dec.queries:
            w.writerow([q.node, f"{q.edge[0]}-{q.edge[1]}", str(bool(q.cached)).lower()])


def cmd_decompose(args) -> int:
    from .pipeline import annotate_efficient, annotate_full, baseline_distance, baseline_random

    t0 = time.perf_counter()
    graph = load_graph(args.graph)
    inputs = {"graph": args.graph}
    rs = None
    if args.relations:
        rs = RelationSet.load(args.relations)
        inputs["relations"] = args.relations
    if args.embeddings:
        inputs["embeddings"] = args.embeddings

    backend_kind, queries = None, {}
    if args.mode in ("full", "efficient"):
        if rs is None:
            raise UsageError(f"--mode {args.mode} needs --relations")
        gateway = Gateway(_backend_config(args, num_relations=len(rs)), graph=graph)
        if args.mode == "full":
            dec = annotate_full(gateway, graph, rs, parallelism=args.parallelism)
        else:
            if args.embeddings:
                X = load_embeddings(args.embeddings, graph.node_count)
            else:
                X = default_features(graph)
            gamma = math.inf if args.gamma is None else args.gamma
            dec = annotate_efficient(gateway, graph, rs, np.asarray(X), gamma, seed=args.seed)
        backend_kind = gateway.backend.kind
        queries = {**gateway.stats(), "total": len(dec.queries), "edges": graph.num_edges}
    elif args.mode == "random":
        R = len(rs) if rs is not None else args.num_relations
        if R is None:
            raise UsageError("--mode random needs --relations or --num-relations")
        dec = baseline_random(graph, R, args.seed)
    else:
        if not args.embeddings:
            raise ConfigError("--mode distance needs --embeddings")
        X = load_embeddings(args.embeddings, graph.node_count)
        dec = baseline_distance(graph, np.asarray(X), args.threshold)

    out = Path(args.out)
    dec.save(out, graph.edges)
    outputs = [str(out)]
    if args.mode in ("full", "efficient"):
        audit = Path(args.audit) if args.audit else out.with_suffix(".audit.csv")
        _write_audit(dec, audit)
        outputs.append(str(audit))
    manifest = RunManifest("decompose", config_digest("decompose", args, inputs), inputs=inputs,
                           outputs=outputs, seeds=[args.seed], backend=backend_kind, queries=queries)
    manifest.timings["total_s"] = time.perf_counter() - t0
    manifest.write(_manifest_path(args, out.with_suffix(".manifest.json")))
    msg = f"{len(dec)} edges decomposed ({args.mode}) -> {out}"
    if queries:
        msg += f"; {queries['total']} queries for {graph.num_edges} edges"
    print(msg)
    return 0


def cmd_train(args) -> int:
    from .gnn.training import save_model, write_leaderboard
    from .plotting import plot_accuracy_per_seed, plot_loss_curves, plot_sim_mean
    from .report import FIGURES, render_report, write_seed_csv

    t0 = time.perf_counter()
    if args.arch in ("rgcn", "gine") and not args.dec:
        raise UsageError(f"--arch {args.arch} needs --dec")
    if args.arch == "gine" and not args.relations:
        raise UsageError("--arch gine needs --relations for edge features")
    graph = load_graph(args.graph)
    inputs = {"graph": args.graph}
    dec = rs = None
    if args.arch == "gcn":
        if args.dec:
            logger.warning("gcn uses a single edge type; ignoring --dec %s", args.dec)
    else:
        dec = EdgeDecomposition.load(args.dec)
        inputs["dec"] = args.dec
    if args.relations and args.arch != "gcn":
        rs = RelationSet.load(args.relations)
        inputs["relations"] = args.relations
    if args.embeddings:
        X = np.asarray(load_embeddings(args.embeddings, graph.node_count))
        inputs["embeddings"] = args.embeddings
    else:
        X = default_features(graph)

    seeds = [args.split_seed + k for k in range(args.seeds)]
    single = None if args.grid else {"lr": args.lr, "layers": args.layers, "dropout": args.dropout}
    runs = []
    for s in seeds:
        run = run_seed(args.arch, graph, X, s, dec, rs, grid=args.grid, epochs=args.epochs, single=single)
        logger.info("seed %d: val %.4f test %.4f (%.1fs)", s, run.val_acc, run.test_acc, run.seconds)
        runs.append(run)

    report = Path(args.report)
    report.mkdir(parents=True, exist_ok=True)
    outputs = []
    board = [row for r in runs for row in r.result.leaderboard]
    write_leaderboard(board, report / "leaderboard.csv")
    write_seed_csv(runs, report / "seeds.csv")
    outputs += [str(report / "leaderboard.csv"), str(report / "seeds.csv")]
    for r in runs:
        p = report / f"model_seed{r.seed}.bin"
        save_model(r.result.best, p)
        outputs.append(str(p))
    plot_accuracy_per_seed(runs, report / FIGURES["accuracy"], title=args.arch)
    plot_sim_mean(runs, report / FIGURES["sim_mean"])
    plot_loss_curves(runs, report / FIGURES["loss"])
    outputs += [str(report / name) for name in FIGURES.values()]
    md = render_report(runs, arch=args.arch, graph_name=Path(args.graph).name,
                       dec_name=Path(args.dec).name if dec is not None else None, grid=args.grid)
    (report / "report.md").write_text(md)
    outputs.append(str(report / "report.md"))

    manifest = RunManifest("train", config_digest("train", args, inputs), inputs=inputs,
                           outputs=outputs, seeds=seeds)
    manifest.timings = {f"seed_{r.seed}_s": r.seconds for r in runs}
    manifest.timings["total_s"] = time.perf_counter() - t0
    manifest.write(_manifest_path(args, report / "manifest.json"))
    test = [r.test_acc for r in runs]
    print(f"{args.arch}: test accuracy {100 * np.mean(test):.2f}% over {len(seeds)} seed(s); report in {report}")
    return 0


# parser -------------------------------------------------------------------

def _positive_int(s):
    v = int(s)
    if v < 1:
        raise argparse.ArgumentTypeError("must be >= 1")
    return v


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="semedge", description=__doc__.splitlines()[0])
    parser.add_argument("--log-level", default="INFO", choices=["DEBUG", "INFO", "WARNING", "ERROR"])
    parser.add_argument("--version", action="version", version=f"%(prog)s {__version__}")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("synth", help="write a planted-relation graph and its ground truth")
    p.add_argument("--n", type=int, default=300)
    p.add_argument("--k", type=int, default=3)
    p.add_argument("--deg", type=int, default=5, help="mean degree per relation")
    p.add_argument("--noise", type=float, default=0.7, help="probability a text token is a filler word")
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--out", required=True, help="output directory")
    p.add_argument("--manifest")
    p.set_defaults(func=cmd_synth)

    p = sub.add_parser("identify", help="propose and filter relation types")
    p.add_argument("--graph", required=True)
    p.add_argument("--out", required=True, help="relation set JSON")
    p.add_argument("--transcripts", help="raw prompt/answer JSONL (default next to --out)")
    p.add_argument("--skip-discriminator", action="store_true")
    p.add_argument("--manifest")
    _add_backend_flags(p)
    p.set_defaults(func=cmd_identify)

    p = sub.add_parser("decompose", help="label every edge with relation types")
    p.add_argument("--graph", required=True)
    p.add_argument("--relations")
    p.add_argument("--mode", choices=MODES, default="full")
    p.add_argument("--gamma", type=_positive_int, help="per-node query budget (efficient mode)")
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--num-relations", type=_positive_int, help="relation count for --mode random")
    p.add_argument("--embeddings", help="node embedding CSV")
    p.add_argument("--threshold", type=float, default=0.5, help="cosine distance cut for --mode distance")
    p.add_argument("--parallelism", type=_positive_int, default=1)
    p.add_argument("--out", required=True, help="decomposition JSONL")
    p.add_argument("--audit", help="query audit CSV (default next to --out)")
    p.add_argument("--manifest")
    _add_backend_flags(p)
    p.set_defaults(func=cmd_decompose)

    p = sub.add_parser("train", help="train and evaluate a node classifier")
    p.add_argument("--graph", required=True)
    p.add_argument("--dec", help="edge decomposition JSONL (rgcn, gine)")
    p.add_argument("--relations", help="relation set JSON (required for gine)")
    p.add_argument("--arch", choices=("gcn", "rgcn", "gine"), required=True)
    p.add_argument("--split-seed", type=int, default=0, help="first seed; later seeds count up from it")
    p.add_argument("--seeds", type=_positive_int, default=10)
    p.add_argument("--grid", action="store_true", help="search the full hyperparameter grid per seed")
    p.add_argument("--lr", type=float, default=0.01)
    p.add_argument("--layers", type=int, choices=(2, 3), default=2)
    p.add_argument("--dropout", type=float, default=0.5)
    p.add_argument("--epochs", type=_positive_int, default=200)
    p.add_argument("--embeddings", help="node embedding CSV instead of hashed bag-of-words")
    p.add_argument("--report", required=True, help="output directory")
    p.add_argument("--manifest")
    p.set_defaults(func=cmd_train)
    return parser


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    logging.basicConfig(level=args.log_level, format="%(levelname)s %(name)s: %(message)s")
    try:
        return args.func(args)
    except (UsageError, ConfigError) as exc:
        parser.print_usage(sys.stderr)
        print(f"semedge {args.command}: error: {exc}", file=sys.stderr)
        return 2
    except (SemEdgeError, OSError) as exc:
        print(f"semedge {args.command}: {type(exc).__name__}: {exc}", file=sys.stderr)
        return 1


if __name__ == "__main__":
    sys.exit(main())
