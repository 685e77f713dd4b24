"""Command-line interface.

Exit codes: 0 when the question was answered (whatever the verdict), 2 for
unreadable input or bad parameters, 3 when the exploration budget is
exceeded, 4 when the input is outside the class a command requires.
"""

from __future__ import annotations

import argparse
import json
import sys
from pathlib import Path

from . import fileformat as ff
from .analysis import check_soundness, classify
from .generators import (GeneratorError, gen_fdm, gen_fdm_unsound, gen_pingpong, gen_random_sdan, gen_sat,
                         parse_dimacs)
from .model import Negotiation
from .reduction import (ClassificationError, RULES, RuleError, metrics, reduce_sdan, reduce_weakly_deterministic,
                        replay)
from .semantics import DEFAULT_BUDGET, ExplorationBudgetExceeded, reach
from .summary import Summary, compare_summaries, summarize_graph

EXIT_OK, EXIT_INPUT, EXIT_BUDGET, EXIT_CLASS = 0, 2, 3, 4


class CliError(Exception):
    def __init__(self, message: str, code: int):
        super().__init__(message)
        self.code = code


def _read(path: str) -> str:
    try:
        return sys.stdin.read() if path == "-" else Path(path).read_text()
    except OSError as exc:
        raise CliError(f"cannot read {path}: {exc.strerror}", EXIT_INPUT) from None


def _load(path: str, generalized: bool = False) -> Negotiation:
    try:
        return ff.parse(_read(path), generalized=generalized)
    except ff.ParseError as exc:
        raise CliError("\n".join(f"{path}:{d}" for d in exc.diagnostics), EXIT_INPUT) from None


def _write(path: str | None, text: str) -> None:
    if path is None or path == "-":
        sys.stdout.write(text)
    else:
        Path(path).write_text(text)


def _emit(args, doc: dict, text: str) -> None:
    if args.format == "machine":
        sys.stdout.write(ff.dumps(doc))
    else:
        print(text)


def _render_relation(rel) -> list[str]:
    if not len(rel):
        return ["    (empty)"]
    return [f"    {','.join(q)} -> {','.join(q2)}" for q, q2 in rel.sorted_pairs()]


def _render_summary(s: Summary) -> str:
    lines = [f"verdict: {s.verdict.describe()}"]
    if s.transformers is not None:
        lines.append(f"agents: {', '.join(s.domain.agents)}")
        for r, rel in sorted(s.transformers.items()):
            lines.append(f"  outcome {r} ({len(rel)} pairs):")
            lines += _render_relation(rel)
    return "\n".join(lines)


def _summary_from_atom(n: Negotiation, source_verdict) -> Summary:
    """Read the summary off a single-atom reduction result."""
    (k,) = n.atoms
    return Summary(source_verdict, n.domain, {r: n.transformer(k, r).lift(n.domain) for r in n.final_outcomes()})


def _reduce(n: Negotiation):
    """Dispatch to the reduction strategy that fits the classification of ``n``."""
    c = classify(n)
    if c.acyclic and c.deterministic:
        result, trace, bounds = reduce_sdan(n)
        return "sdan", result, trace, bounds
    if c.acyclic and c.weakly_deterministic:
        result, trace = reduce_weakly_deterministic(n)
        return "weakly-deterministic", result, trace, None
    why = "cyclic" if not c.acyclic else "not weakly deterministic"
    raise CliError(f"reduction does not apply: the negotiation is {why}; use --method statespace", EXIT_CLASS)


# -- commands ---------------------------------------------------------------

def cmd_check(args) -> int:
    n = _load(args.file)
    v = check_soundness(n, args.budget)
    _emit(args, ff.verdict_doc(v), v.describe())
    return EXIT_OK


def cmd_classify(args) -> int:
    n = _load(args.file)
    c = classify(n)
    text = "\n".join([
        f"acyclic: {'yes' if c.acyclic else 'no'}",
        f"deterministic agents: {', '.join(sorted(c.deterministic_agents)) or '(none)'}",
        f"deterministic: {'yes' if c.deterministic else 'no'}",
        f"weakly deterministic: {'yes' if c.weakly_deterministic else 'no'}",
    ])
    _emit(args, ff.classification_doc(c), text)
    return EXIT_OK


def cmd_summarize(args) -> int:
    n = _load(args.file)
    reduced = state = None
    if args.method in ("reduce", "both"):
        _, result, _, _ = _reduce(n)
        if len(result.atoms) == 1:
            reduced = _summary_from_atom(result, check_soundness(n, args.budget))
        else:
            reduced = Summary(check_soundness(n, args.budget), n.domain, None)
    if args.method in ("statespace", "both"):
        state = summarize_graph(n, reach(n, args.budget))
    if args.method == "both":
        eq = compare_summaries(reduced, state)
        status = "PASS" if eq.equivalent else "FAIL"
        doc = ff.summary_doc(state)
        doc["cross_check"] = {"status": status, "reason": eq.reason}
        _emit(args, doc, f"{_render_summary(state)}\ncross-check: {status} ({eq.reason})")
        return EXIT_OK
    s = reduced if reduced is not None else state
    _emit(args, ff.summary_doc(s), _render_summary(s))
    return EXIT_OK


def cmd_reduce(args) -> int:
    n = _load(args.file)
    strategy, result, trace, bounds = _reduce(n)
    if args.output:
        _write(args.output, ff.serialize(result))
    if args.trace:
        _write(args.trace, ff.write_trace(trace))
    counts = {rule: trace.count(rule) for rule in RULES}
    stuck = len(result.atoms) > 1
    doc = {"kind": "reduction", "strategy": strategy, "atoms_before": len(n.atoms),
           "atoms_after": len(result.atoms), "status": "unsound (stuck)" if stuck else "reduced",
           "rule_counts": counts}
    lines = [f"strategy: {strategy}",
             f"atoms: {len(n.atoms)} -> {len(result.atoms)}",
             "result: " + ("unsound (stuck)" if stuck else "single atom (summary)")]
    lines += [f"{rule}: {count}" for rule, count in counts.items() if count]
    if bounds is not None:
        ok = counts["merge"] <= bounds.out and counts["d-shortcut"] <= bounds.shoc
        doc["bounds"] = {"out": bounds.out, "shoc": bounds.shoc, "within": ok}
        lines.append(f"bounds: merge {counts['merge']} <= Out {bounds.out}, "
                     f"d-shortcut {counts['d-shortcut']} <= Shoc {bounds.shoc}: {'ok' if ok else 'VIOLATED'}")
    if args.output is None:
        doc["result"] = json.loads(ff.serialize(result))
    _emit(args, doc, "\n".join(lines) if args.output else "\n".join(lines) + "\n" + ff.serialize(result).rstrip())
    return EXIT_OK


def cmd_equiv(args) -> int:
    n1, n2 = _load(args.first, generalized=True), _load(args.second, generalized=True)
    if n1.domain != n2.domain:
        raise CliError("equivalence needs the same agents and state spaces", EXIT_INPUT)
    s1 = summarize_graph(n1, reach(n1, args.budget))
    s2 = summarize_graph(n2, reach(n2, args.budget))
    eq = compare_summaries(s1, s2)
    doc = {"kind": "equivalence", "equivalent": eq.equivalent, "reason": eq.reason, "differing": list(eq.differing)}
    _emit(args, doc, f"{'equivalent' if eq.equivalent else 'not equivalent'}: {eq.reason}")
    return EXIT_OK


def cmd_metrics(args) -> int:
    n = _load(args.file)
    try:
        m = metrics(n, args.budget)
    except ValueError as exc:
        raise CliError(str(exc), EXIT_CLASS) from None
    lines = [f"Out: {m.out}", f"Shoc: {m.shoc}"]
    lines += [f"  shoc({k},{r}) = {v}" for (k, r), v in sorted(m.shoc_per_pair.items())]
    _emit(args, ff.metrics_doc(m), "\n".join(lines))
    return EXIT_OK


def cmd_gen(args) -> int:
    times = [t.strip() for t in args.times.split(",") if t.strip()]
    try:
        if args.family == "fdm":
            n = gen_fdm(times)
        elif args.family == "fdm-unsound":
            n = gen_fdm_unsound(times)
        elif args.family == "pingpong":
            n = gen_pingpong(times)
        elif args.family == "sat":
            if not args.cnf:
                raise CliError("gen sat needs --cnf FILE", EXIT_INPUT)
            n = gen_sat(parse_dimacs(_read(args.cnf)))
        else:
            n = gen_random_sdan(args.seed, args.atoms, args.agents, args.outcomes, args.states)
    except GeneratorError as exc:
        raise CliError(str(exc), EXIT_INPUT) from None
    _write(args.output, ff.serialize(n))
    return EXIT_OK


def cmd_replay(args) -> int:
    n = _load(args.file)
    tf = ff.read_trace(_read(args.trace))
    if tf.source and tf.source != ff.fingerprint(n):
        raise CliError("trace was recorded on a different source negotiation", EXIT_INPUT)
    try:
        result = replay(n, tf.applications)
    except (RuleError, TypeError, ValueError) as exc:
        raise CliError(f"replay failed: {exc}", EXIT_INPUT) from None
    ok = not tf.result or tf.result == ff.fingerprint(result)
    if args.output:
        _write(args.output, ff.serialize(result))
    doc = {"kind": "replay", "applications": len(tf.applications), "atoms_after": len(result.atoms),
           "result_matches": ok}
    _emit(args, doc, f"replayed {len(tf.applications)} applications; "
                     f"result {'matches' if ok else 'DIFFERS from'} the recorded fingerprint")
    return EXIT_OK if ok else EXIT_INPUT


def build_parser() -> argparse.ArgumentParser:
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--format", choices=("text", "machine"), default="text")
    common.add_argument("--budget", type=int, default=DEFAULT_BUDGET, help="maximum number of markings to explore")

    p = argparse.ArgumentParser(prog="negotiations", description="Analyse and reduce negotiations.")
    sub = p.add_subparsers(dest="command", required=True)

    s = sub.add_parser("check", parents=[common], help="decide soundness")
    s.add_argument("file")
    s.set_defaults(func=cmd_check)

    s = sub.add_parser("classify", parents=[common], help="acyclic / deterministic / weakly deterministic")
    s.add_argument("file")
    s.set_defaults(func=cmd_classify)

    s = sub.add_parser("summarize", parents=[common], help="compute the summary transformers")
    s.add_argument("file")
    s.add_argument("--method", choices=("reduce", "statespace", "both"), default="statespace")
    s.set_defaults(func=cmd_summarize)

    s = sub.add_parser("reduce", parents=[common], help="apply reduction rules to a fixpoint")
    s.add_argument("file")
    s.add_argument("--trace", help="write the rule applications to this file")
    s.add_argument("--output", "-o", help="write the reduced negotiation to this file")
    s.set_defaults(func=cmd_reduce)

    s = sub.add_parser("equiv", parents=[common], help="compare two negotiations by their summaries")
    s.add_argument("first")
    s.add_argument("second")
    s.set_defaults(func=cmd_equiv)

    s = sub.add_parser("metrics", parents=[common], help="Out and Shoc of an acyclic negotiation")
    s.add_argument("file")
    s.set_defaults(func=cmd_metrics)

    s = sub.add_parser("gen", parents=[common], help="generate an instance")
    s.add_argument("family", choices=("fdm", "fdm-unsound", "pingpong", "sat", "random-sdan"))
    s.add_argument("--times", default="8,9,10", help="comma-separated times for the fdm families")
    s.add_argument("--cnf", help="DIMACS file for the sat family")
    s.add_argument("--seed", type=int, default=0)
    s.add_argument("--atoms", type=int, default=6)
    s.add_argument("--agents", type=int, default=3)
    s.add_argument("--outcomes", type=int, default=2)
    s.add_argument("--states", type=int, default=2)
    s.add_argument("--output", "-o")
    s.set_defaults(func=cmd_gen)

    s = sub.add_parser("replay", parents=[common], help="re-apply a recorded trace")
    s.add_argument("file")
    s.add_argument("trace")
    s.add_argument("--output", "-o")
    s.set_defaults(func=cmd_replay)
    return p


def main(argv: list[str] | None = None) -> int:
    args = build_parser().parse_args(argv)
    if args.budget < 1:
        print("error: --budget must be positive", file=sys.stderr)
        return EXIT_INPUT
    try:
        return args.func(args)
    except CliError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return exc.code
    except ExplorationBudgetExceeded as exc:
        print(f"error: exploration budget exceeded ({exc}); raise it with --budget", file=sys.stderr)
        return EXIT_BUDGET
    except ClassificationError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_CLASS


__all__ = ["main", "build_parser"]
