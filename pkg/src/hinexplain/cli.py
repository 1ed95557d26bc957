"""Command line front end.

Subcommands: ``generate`` (synthetic corpus to TSV), ``recommend`` (top-k
list), ``explain`` (one explanation as JSON), ``certify`` (PRINCE against the
brute-force oracle) and ``benchmark`` (k-sweep table).  Output depends only on
the arguments; wall times are the one exception and ``--no-timing`` blanks
them.  Exit status is 2 for bad input, 1 for internal errors.
"""
from __future__ import annotations

import argparse
import json
import statistics
import sys
from concurrent.futures import ProcessPoolExecutor

from . import __version__
from .baselines import baseline_sweep, explain_hc, explain_sp
from .corpus import SynthParams, generate_synth, load_graph, save_graph
from .errors import HinError, NoActions, NoEligibleItems, TooManyActions
from .explain import ExplainConfig, Explanation, ScoreMode, compute_scores, explain
from .graph import HinGraph, NodeType, _label, make_transition_view, user_actions
from .oracle import brute_force_explain
from .ppr import eligible_items, top_k_items

SCHEMA_VERSION = 1
METHODS = ("prince", "hc", "sp", "oracle")
MODES = ("precomputed", "dynamic")


class UsageError(Exception):
    pass


def _int_list(text: str) -> list[int]:
    try:
        values = [int(x) for x in text.split(",") if x.strip()]
    except ValueError:
        raise argparse.ArgumentTypeError(f"expected comma-separated integers, got {text!r}") from None
    if not values:
        raise argparse.ArgumentTypeError("empty list")
    return values


def _choice_list(choices):
    def parse(text: str) -> list[str]:
        values = [x.strip() for x in text.split(",") if x.strip()]
        bad = [v for v in values if v not in choices]
        if bad or not values:
            raise argparse.ArgumentTypeError(f"choose from {','.join(choices)}, got {text!r}")
        return values
    return parse


def _add_config(p: argparse.ArgumentParser, k_default: int = 5) -> None:
    p.add_argument("--alpha", type=float, default=0.15, help="teleport probability")
    p.add_argument("--beta", type=float, default=0.5, help="weight of graph edges against similarity")
    p.add_argument("--k", type=int, default=k_default, help="size of the candidate pool")
    p.add_argument("--epsilon", type=float, default=1e-8, help="reverse-push accuracy")
    p.add_argument("--tie-tol", type=float, default=1e-10, help="score gap treated as a tie")


def _add_synth(p: argparse.ArgumentParser) -> None:
    d = SynthParams()
    p.add_argument("--n-users", type=int, default=d.n_users)
    p.add_argument("--n-items", type=int, default=d.n_items)
    p.add_argument("--n-categories", type=int, default=d.n_categories)
    p.add_argument("--n-reviews", type=int, default=d.n_reviews)
    p.add_argument("--actions-min", type=int, default=d.actions_per_user[0])
    p.add_argument("--actions-max", type=int, default=d.actions_per_user[1])
    p.add_argument("--follows", action="store_true", help="add directed user-user follows edges")
    p.add_argument("--similarity-rate", type=float, default=d.similarity_edge_rate)
    p.add_argument("--rng-seed", type=int, default=d.rng_seed)


def _synth_params(args) -> SynthParams:
    return SynthParams(args.n_users, args.n_items, args.n_categories, args.n_reviews,
                       (args.actions_min, args.actions_max), args.follows,
                       args.similarity_rate, args.rng_seed)


def _config(args, **overrides) -> ExplainConfig:
    fields = dict(alpha=args.alpha, beta=args.beta, k=args.k, epsilon=args.epsilon, tie_tol=args.tie_tol)
    if getattr(args, "mode", None):
        fields["score_mode"] = args.mode
    fields.update(overrides)
    return ExplainConfig(**fields)


def _user(g: HinGraph, name: str) -> int:
    try:
        return g.index(name)
    except KeyError:
        raise UsageError(f"unknown user {name!r}") from None


def _graph(args) -> HinGraph:
    if args.graph is None:
        return generate_synth(_synth_params(args))
    return load_graph(args.graph)


def _emit(args, text: str) -> None:
    if getattr(args, "out", None):
        with open(args.out, "w", encoding="utf-8") as fh:
            fh.write(text)
    else:
        sys.stdout.write(text)


def cmd_generate(args) -> None:
    if not args.out:
        raise UsageError("generate needs --out")
    save_graph(generate_synth(_synth_params(args)), args.out)


def cmd_recommend(args) -> None:
    g = load_graph(args.graph)
    user = _user(g, args.seed_user)
    cfg = _config(args)
    view = make_transition_view(g, cfg.beta)
    lines = [f"{rank}\t{g.name(item)}\t{score!r}\n"
             for rank, (item, score) in enumerate(top_k_items(view, user, cfg.k, cfg.alpha, cfg.tol, cfg.tie_tol), 1)]
    _emit(args, "".join(lines))


def run_method(g: HinGraph, user: int, method: str, cfg: ExplainConfig, view=None) -> Explanation:
    if method == "prince":
        return explain(g, user, cfg, view=view)
    if method == "hc":
        return explain_hc(g, user, cfg, view=view)
    if method == "sp":
        return explain_sp(g, user, cfg, view=view)
    if method == "oracle":
        return brute_force_explain(g, user, cfg, view=view)
    raise UsageError(f"unknown method {method!r}")


def explanation_record(g: HinGraph, e: Explanation, timing: bool = True) -> dict:
    """JSON-ready view of an explanation; node ids are the graph's names."""
    types = user_actions(g, e.user)
    by_target = dict(zip(types.targets, types.edge_types))
    return {
        "schema_version": SCHEMA_VERSION,
        "user": g.name(e.user),
        "method": e.method.value,
        "status": e.status.value,
        "original_rec": g.name(e.original_rec),
        "replacement": None if e.replacement is None else g.name(e.replacement),
        "actions": [{"target": g.name(t), "edge_types": [_label(k) for k in by_target[t]]} for t in e.actions],
        "size": e.size,
        "wall_time_ms": e.wall_time_ms if timing else None,
        "score_mode": None if e.score_mode is None else e.score_mode.value,
    }


def cmd_explain(args) -> None:
    g = load_graph(args.graph)
    user = _user(g, args.seed_user)
    e = run_method(g, user, args.method, _config(args))
    _emit(args, json.dumps(explanation_record(g, e, not args.no_timing), sort_keys=False) + "\n")


def cmd_certify(args) -> int:
    g = _graph(args)
    cfg = _config(args)
    view = make_transition_view(g, cfg.beta)
    users = [_user(g, args.seed_user)] if args.seed_user else g.nodes_of_type(NodeType.USER)
    lines = [f"#schema_version\t{SCHEMA_VERSION}\n",
             "user\tn_actions\tprince_size\tprince_status\toracle_size\toracle_status\tmatch\n"]
    mismatches = 0
    for u in users:
        try:
            ours = explain(g, u, cfg, view=view)
            ref = brute_force_explain(g, u, cfg, args.max_actions, view=view)
        except (NoActions, NoEligibleItems, TooManyActions):
            continue
        match = ours.size == ref.size and ours.status == ref.status
        mismatches += not match
        lines.append(f"{g.name(u)}\t{ours.n_actions}\t{ours.size}\t{ours.status.value}\t"
                     f"{ref.size}\t{ref.status.value}\t{int(match)}\n")
    _emit(args, "".join(lines))
    if mismatches:
        print(f"error: {mismatches} users disagree with the oracle", file=sys.stderr)
        return 1
    return 0


def _user_jobs(g: HinGraph, u: int, ks, methods, modes, cfg: ExplainConfig) -> list[tuple]:
    """All explanations one user contributes to the benchmark table.

    Rows are ``(k, method, mode, cost, found, wall_ms)``; users without
    actions or candidates return nothing.
    """
    view = make_transition_view(g, cfg.beta)
    try:
        if not user_actions(g, u).targets or len(eligible_items(g, u)) < 2:
            return []
    except HinError:
        return []
    rows = []
    for method in methods:
        if method == "prince":
            for mode in modes:
                scores = None
                if mode == "precomputed":
                    ranked = top_k_items(view, u, max(ks), cfg.alpha, cfg.tol, cfg.tie_tol)
                    scores = compute_scores(view, u, [i for i, _ in ranked], cfg.alpha, cfg.epsilon)
                for k in ks:
                    run = ExplainConfig(**{**cfg.__dict__, "k": k, "score_mode": ScoreMode(mode)})
                    e = explain(g, u, run, view=view, scores=scores)
                    rows.append((k, method, mode, e.cost, e.found, e.wall_time_ms))
        elif method in ("hc", "sp"):
            for k, e in baseline_sweep(g, u, method, ks, cfg, view=view).items():
                rows.append((k, method, "-", e.cost, e.found, e.wall_time_ms))
        else:
            for k in ks:
                e = brute_force_explain(g, u, ExplainConfig(**{**cfg.__dict__, "k": k}), view=view)
                rows.append((k, method, "-", e.cost, e.found, e.wall_time_ms))
    return rows


def _job(payload):
    g, u, ks, methods, modes, cfg = payload
    return u, _user_jobs(g, u, ks, methods, modes, cfg)


def benchmark_rows(g: HinGraph, users, ks, methods, modes, cfg: ExplainConfig, workers: int = 1) -> list[tuple]:
    payloads = [(g, u, ks, methods, modes, cfg) for u in users]
    if workers > 1:
        with ProcessPoolExecutor(max_workers=workers) as pool:
            results = list(pool.map(_job, payloads))
    else:
        results = [_job(p) for p in payloads]
    # Results are keyed by user, so aggregation does not depend on completion order.
    rows = []
    for _, user_rows in sorted(results, key=lambda r: r[0]):
        rows.extend(user_rows)
    return rows


def summarize(rows: list[tuple], ks, methods, modes) -> list[dict]:
    table = []
    for k in sorted(ks):
        for method in methods:
            for mode in (modes if method == "prince" else ["-"]):
                sel = [r for r in rows if r[0] == k and r[1] == method and r[2] == mode]
                if not sel:
                    continue
                costs = [r[3] for r in sel]
                table.append({
                    "k": k, "method": method, "mode": mode, "n": len(sel),
                    "mean_size": statistics.fmean(costs),
                    "std_size": statistics.pstdev(costs),
                    "success_rate": sum(r[4] for r in sel) / len(sel),
                    "mean_time_ms": statistics.fmean(r[5] for r in sel),
                })
    return table


def cmd_benchmark(args) -> None:
    g = _graph(args)
    cfg = _config(args)
    users = g.nodes_of_type(NodeType.USER)
    if args.users is not None:
        users = users[:args.users]
    modes = [m for m in MODES if m in args.modes]
    methods = [m for m in METHODS if m in args.methods]
    rows = benchmark_rows(g, users, sorted(set(args.ks)), methods, modes, cfg, args.workers)
    lines = [f"#schema_version\t{SCHEMA_VERSION}\n",
             "k\tmethod\tmode\tn\tmean_size\tstd_size\tsuccess_rate\tmean_time_ms\n"]
    for r in summarize(rows, args.ks, methods, modes):
        t = "-" if args.no_timing else f"{r['mean_time_ms']:.4f}"
        lines.append(f"{r['k']}\t{r['method']}\t{r['mode']}\t{r['n']}\t{r['mean_size']:.4f}\t"
                     f"{r['std_size']:.4f}\t{r['success_rate']:.4f}\t{t}\n")
    _emit(args, "".join(lines))


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="hinexplain", description=__doc__.split("\n")[0])
    parser.add_argument("--version", action="version", version=__version__)
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("generate", help="write a synthetic corpus as a TSV edge list")
    _add_synth(p)
    p.add_argument("--out", help="output path (a .stats sidecar is written next to it)")
    p.set_defaults(func=cmd_generate)

    p = sub.add_parser("recommend", help="top-k items for one user")
    p.add_argument("--graph", required=True)
    p.add_argument("--seed-user", required=True)
    _add_config(p, k_default=10)
    p.add_argument("--out")
    p.set_defaults(func=cmd_recommend)

    p = sub.add_parser("explain", help="explain one user's top item as JSON")
    p.add_argument("--graph", required=True)
    p.add_argument("--seed-user", required=True)
    p.add_argument("--method", choices=METHODS, default="prince")
    p.add_argument("--mode", choices=MODES, default="precomputed")
    _add_config(p)
    p.add_argument("--no-timing", action="store_true", help="print null for wall_time_ms")
    p.add_argument("--out")
    p.set_defaults(func=cmd_explain)

    p = sub.add_parser("certify", help="compare PRINCE with the brute-force oracle")
    p.add_argument("--graph", help="edge list; a synthetic corpus is generated when omitted")
    p.add_argument("--seed-user", help="only this user (default: every user)")
    p.add_argument("--max-actions", type=int, default=15, help="skip users with more actions")
    _add_config(p)
    _add_synth(p)
    p.add_argument("--out")
    p.set_defaults(func=cmd_certify)

    p = sub.add_parser("benchmark", help="k-sweep of mean explanation sizes and times")
    p.add_argument("--graph", help="edge list; a synthetic corpus is generated when omitted")
    p.add_argument("--ks", type=_int_list, default=[3, 5, 10, 15, 20])
    p.add_argument("--methods", type=_choice_list(METHODS), default=["prince", "hc", "sp"])
    p.add_argument("--modes", type=_choice_list(MODES), default=list(MODES))
    p.add_argument("--users", type=int, help="only the first N users")
    p.add_argument("--workers", type=int, default=1)
    p.add_argument("--no-timing", action="store_true", help="print '-' for mean_time_ms")
    _add_config(p)
    _add_synth(p)
    p.add_argument("--out")
    p.set_defaults(func=cmd_benchmark)
    return parser


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        return args.func(args) or 0
    except (HinError, UsageError, ValueError, OSError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2
    except Exception as exc:  # noqa: BLE001
        print(f"internal error: {type(exc).__name__}: {exc}", file=sys.stderr)
        return 1


if __name__ == "__main__":
    sys.exit(main())
