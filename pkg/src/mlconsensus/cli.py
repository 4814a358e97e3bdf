"""Command-line pipeline: ensemble -> detect -> eval.

Every command is deterministic for fixed inputs, flags and seed, and the
stages communicate through plain TSV files so externally produced
ensembles or partitions can be dropped in. Exit codes: 0 ok, 2 input
error, 3 solver failure, 4 node-set mismatch.
"""

from __future__ import annotations

import argparse
import os
import sys

from . import consensus as cns
from . import ensemble as ens
from . import metrics as met
from . import report as rep
from .coassoc import save_coassociation
from .errors import InputError, MismatchError, SolverError
from .filters import (FILTER_MODELS, FilterConfig, filter_coassociation,
                      save_significance)
from .graphs import load_multilayer


def _add_common(parser: argparse.ArgumentParser) -> None:
    parser.add_argument("--out", default="out", metavar="DIR",
                        help="output directory (default: ./out)")
    parser.add_argument("--seed", type=int, default=0,
                        help="seed recorded for reproducible runs (default: 0)")
    parser.add_argument("--verbose", action="store_true",
                        help="print progress details to stderr")


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="mlconsensus",
        description="Consensus community detection in multilayer networks "
                    "with statistical co-association pruning.")
    sub = parser.add_subparsers(dest="command", required=True)

    p_ens = sub.add_parser("ensemble",
                           help="partition every layer with the base detector")
    p_ens.add_argument("input", help="multilayer edge list (layerId srcId dstId)")
    _add_common(p_ens)

    p_det = sub.add_parser("detect",
                           help="filter co-associations and optimize the consensus")
    p_det.add_argument("input", help="multilayer edge list (layerId srcId dstId)")
    p_det.add_argument("--ensemble", metavar="FILE",
                       help="use these per-layer partitions instead of the "
                            "internal detector")
    p_det.add_argument("--model", choices=FILTER_MODELS, default="mlf",
                       help="pruning model (default: mlf)")
    p_det.add_argument("--alpha", type=float, default=0.05,
                       help="significance level for model filters (default: 0.05)")
    p_det.add_argument("--theta", type=float, default=None,
                       help="minimum co-association (threshold model only)")
    _add_common(p_det)

    p_eval = sub.add_parser("eval", help="score a consensus partition")
    p_eval.add_argument("graph", help="multilayer edge list")
    p_eval.add_argument("consensus", help="community file (nodeId communityId)")
    p_eval.add_argument("--retained", metavar="FILE",
                        help="retained-edge file from detect; defaults to "
                             "retaining all intra-community edges")
    p_eval.add_argument("--reference", metavar="FILE",
                        help="reference partition (2 columns) for NMI, or "
                             "ensemble file (3 columns) for average NMI")
    _add_common(p_eval)
    return parser


def _say(args, message: str) -> None:
    if args.verbose:
        print(message, file=sys.stderr)


def cmd_ensemble(args) -> int:
    g = load_multilayer(args.input)
    _say(args, f"loaded {g!r}")
    e = ens.build_ensemble(g, seed=args.seed)
    os.makedirs(args.out, exist_ok=True)
    path = os.path.join(args.out, "ensemble.tsv")
    ens.save_ensemble(e, g, path)
    total = sum(s.num_communities for s in e.structures)
    print(f"wrote {path}: {len(e.structures)} layer structures, "
          f"{total} communities total")
    return 0


def cmd_detect(args) -> int:
    if args.theta is not None and args.model != "threshold":
        raise InputError("--theta is only valid with --model threshold")
    g = load_multilayer(args.input)
    _say(args, f"loaded {g!r}")
    os.makedirs(args.out, exist_ok=True)
    if args.ensemble:
        e = ens.load_ensemble(args.ensemble, g)
        _say(args, f"loaded ensemble from {args.ensemble}")
    else:
        e = ens.build_ensemble(g, seed=args.seed)
        ens.save_ensemble(e, g, os.path.join(args.out, "ensemble.tsv"))
        _say(args, "built ensemble with the internal detector")

    cfg = FilterConfig(alpha=args.alpha, theta=args.theta)
    matrix, gm, sig, filtered = filter_coassociation(g, e, args.model, cfg)
    save_coassociation(matrix, os.path.join(args.out, "coassociation.tsv"),
                       layer_order=g.layers)
    save_coassociation(filtered, os.path.join(args.out, "filtered_coassociation.tsv"),
                       layer_order=g.layers)
    rep.plot_weight_histogram(gm, os.path.join(args.out, "coassociation_weights.png"))
    if sig is not None:
        save_significance(gm, sig, cfg.alpha,
                          os.path.join(args.out, "significance.tsv"))
        rep.plot_significance(gm, sig, cfg.alpha,
                              os.path.join(args.out, "significance.png"))
    _say(args, f"filter kept {filtered.num_entries}/{matrix.num_entries} "
               "co-association entries")

    lower = cns.lower_bound_consensus(g, filtered)
    q_lower = lower.q
    state = cns.optimize_from_filtered(g, filtered, seed=args.seed)
    cns.save_communities(state, os.path.join(args.out, "communities.tsv"))
    cns.save_retained(state, os.path.join(args.out, "retained_edges.tsv"))
    cns.save_commit_log(state.log, os.path.join(args.out, "commit_log.tsv"))

    report = met.metric_report(g, state)
    rep.write_metrics(report, os.path.join(args.out, "metrics.tsv"),
                      os.path.join(args.out, "metrics.txt"))
    rep.plot_commit_trace(state.log, os.path.join(args.out, "q_trace.png"))
    rep.plot_community_sizes(report.community_sizes,
                             os.path.join(args.out, "community_sizes.png"))
    print(f"model={args.model} communities={report.n_communities} "
          f"Q(lower-bound)={q_lower:.6f} Q(final)={report.modularity:.6f} "
          f"silhouette={report.silhouette:.6f}")
    print(f"outputs in {args.out}/")
    return 0


def cmd_eval(args) -> int:
    g = load_multilayer(args.graph)
    structure = cns.load_communities(args.consensus)
    if structure.nodes() != set(g.entities):
        raise MismatchError(f"{args.consensus} does not cover exactly the "
                            "graph's entities")
    if args.retained:
        state = cns.ConsensusState(g, structure.membership,
                                   cns.load_retained(args.retained, g))
    else:
        state = cns.membership_state(g, structure)
    report = met.metric_report(g, state)

    if args.reference:
        kind = _reference_kind(args.reference)
        if kind == "ensemble":
            ref = ens.load_ensemble(args.reference, g)
            report.ensemble_nmi = met.ensemble_avg_nmi(ref, structure)
        else:
            ref = cns.load_communities(args.reference)
            report.nmi_reference = met.nmi(ref, structure)

    os.makedirs(args.out, exist_ok=True)
    rep.write_metrics(report, os.path.join(args.out, "metrics.tsv"),
                      os.path.join(args.out, "metrics.txt"))
    rep.plot_community_sizes(report.community_sizes,
                             os.path.join(args.out, "community_sizes.png"))
    parts = [f"modularity={report.modularity:.6f}",
             f"silhouette={report.silhouette:.6f}",
             f"communities={report.n_communities}"]
    if report.nmi_reference is not None:
        parts.append(f"nmi={report.nmi_reference:.6f}")
    if report.ensemble_nmi is not None:
        parts.append(f"ensemble_avg_nmi={report.ensemble_nmi:.6f}")
    print(" ".join(parts))
    return 0


def _reference_kind(path: str) -> str:
    with open(path, encoding="utf-8") as fh:
        for line in fh:
            text = line.strip()
            if not text or text.startswith("#"):
                continue
            return "ensemble" if len(text.split()) == 3 else "communities"
    raise InputError(f"{path}: empty reference file")


def main(argv: list[str] | None = None) -> int:
    args = build_parser().parse_args(argv)
    handlers = {"ensemble": cmd_ensemble, "detect": cmd_detect, "eval": cmd_eval}
    try:
        return handlers[args.command](args)
    except MismatchError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 4
    except SolverError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 3
    except (InputError, OSError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2


if __name__ == "__main__":
    sys.exit(main())
