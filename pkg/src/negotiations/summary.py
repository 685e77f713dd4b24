"""Summary transformers via state elimination on the reachability graph.

The reachability graph is read as a weighted automaton whose weights are
relations on Q_A (sum = union, product = composition, star = closure).
"""

from __future__ import annotations

import random
from dataclasses import dataclass, field
from typing import Callable, Mapping

from .analysis import SoundnessVerdict, is_acyclic, soundness_of
from .model import Domain, Negotiation, Relation
from .semantics import DEFAULT_BUDGET, ReachabilityGraph, reach


@dataclass(frozen=True)
class Summary:
    """Per final outcome, the union over all large steps ending with it.

    ``transformers`` is None for unsound sources.
    """

    verdict: SoundnessVerdict
    domain: Domain
    transformers: Mapping[str, Relation] | None

    @property
    def sound(self) -> bool:
        return self.verdict.sound


@dataclass
class EliminationStats:
    eliminated: int = 0
    compositions: int = 0
    unions: int = 0
    stars: int = 0


# picks the next vertex to eliminate from the remaining candidates
Chooser = Callable[[list[int], dict[int, dict[int, Relation]], dict[int, dict[int, Relation]]], int]


def min_degree(g: ReachabilityGraph) -> Chooser:
    keys = [m.key() for m in g.markings]

    def choose(cands, out, inn):
        return min(cands, key=lambda v: (len(out[v]) + len(inn[v]), keys[v]))

    return choose


def random_order(rng: random.Random) -> Chooser:
    def choose(cands, out, inn):
        return rng.choice(sorted(cands))

    return choose


def _lifted_labels(n: Negotiation) -> dict[tuple[str, str], Relation]:
    return {(k, r): n.transformer(k, r).lift(n.domain) for k in n.atom_order for r in n.atoms[k].outcomes}


def eliminate(
    g: ReachabilityGraph,
    labels: Mapping[tuple[str, str], Relation],
    final_outcome: str,
    domain: Domain,
    choose: Chooser,
    stats: EliminationStats | None = None,
) -> Relation:
    """Sum over all paths from the initial to the final marking whose last step has ``final_outcome``."""
    stats = stats if stats is not None else EliminationStats()
    out: dict[int, dict[int, Relation]] = {v: {} for v in range(len(g.markings))}
    inn: dict[int, dict[int, Relation]] = {v: {} for v in range(len(g.markings))}

    def add(u: int, v: int, rel: Relation) -> None:
        old = out[u].get(v)
        if old is not None:
            rel = old | rel
            stats.unions += 1
        out[u][v] = rel
        inn[v][u] = rel

    for e in g.edges:
        if e.dst == g.final and e.outcome != final_outcome:
            continue
        add(e.src, e.dst, labels[e.atom, e.outcome])

    ends = {g.initial, g.final}
    remaining = [v for v in range(len(g.markings)) if v not in ends]
    while remaining:
        x = choose(remaining, out, inn)
        remaining.remove(x)
        loop = out[x].pop(x, None)
        inn[x].pop(x, None)
        prefix = None
        if loop is not None:
            prefix = loop.star()
            stats.stars += 1
        for u, a in list(inn[x].items()):
            del out[u][x]
            head = a if prefix is None else a @ prefix
            if prefix is not None:
                stats.compositions += 1
            for v, b in out[x].items():
                add(u, v, head @ b)
                stats.compositions += 1
        for v in out[x]:
            del inn[v][x]
        out[x].clear()
        inn[x].clear()
        stats.eliminated += 1

    result = Relation.empty(domain)
    if g.final is None:
        return result
    direct = out[g.initial].get(g.final, result)
    loop = out[g.initial].get(g.initial)
    if loop is not None:
        stats.stars += 1
        stats.compositions += 1
        return loop.star() @ direct
    return direct


def summarize_graph(
    n: Negotiation,
    g: ReachabilityGraph,
    choose: Chooser | None = None,
    stats: EliminationStats | None = None,
) -> Summary:
    verdict = soundness_of(n, g)
    if not verdict.sound:
        return Summary(verdict, n.domain, None)
    labels = _lifted_labels(n)
    choose = choose or min_degree(g)
    return Summary(verdict, n.domain, {
        r: eliminate(g, labels, r, n.domain, choose, stats) for r in n.final_outcomes()
    })


def summarize_statespace(
    n: Negotiation,
    budget: int = DEFAULT_BUDGET,
    rng: random.Random | None = None,
    stats: EliminationStats | None = None,
) -> Summary:
    """Summary of ``n`` by state elimination.

    Vertices are eliminated in ascending degree order (ties by canonical
    marking order) unless ``rng`` is given, in which case the order is random.
    Unsound inputs yield a verdict-only summary.
    """
    g = reach(n, budget)
    return summarize_graph(n, g, random_order(rng) if rng is not None else None, stats)


def brute_force_summary(n: Negotiation, budget: int = DEFAULT_BUDGET) -> Summary:
    """Summary by enumerating every large step explicitly (acyclic inputs only)."""
    if not is_acyclic(n):
        raise ValueError("brute-force summary needs an acyclic negotiation")
    g = reach(n, budget)
    verdict = soundness_of(n, g)
    if not verdict.sound:
        return Summary(verdict, n.domain, None)
    labels = _lifted_labels(n)
    out = g.out_edges()
    result = {r: Relation.empty(n.domain) for r in n.final_outcomes()}
    identity = Relation.identity(n.domain)

    def dfs(v: int, acc: Relation) -> None:
        if v == g.final:
            return
        for e in out[v]:
            rel = acc @ labels[e.atom, e.outcome]
            if e.dst == g.final:
                result[e.outcome] = result[e.outcome] | rel
            else:
                dfs(e.dst, rel)

    dfs(g.initial, identity)
    return Summary(verdict, n.domain, result)


@dataclass(frozen=True)
class Equivalence:
    equivalent: bool
    reason: str
    differing: tuple[str, ...] = field(default=())

    def __bool__(self) -> bool:
        return self.equivalent


def compare_summaries(s1: Summary, s2: Summary) -> Equivalence:
    if s1.domain != s2.domain:
        raise ValueError("summaries over different agents or state spaces")
    if not s1.sound and not s2.sound:
        return Equivalence(True, "both unsound")
    if s1.sound != s2.sound:
        which = "first" if not s1.sound else "second"
        return Equivalence(False, f"only the {which} negotiation is unsound")
    if set(s1.transformers) != set(s2.transformers):
        return Equivalence(False, f"final outcomes differ: {sorted(s1.transformers)} vs {sorted(s2.transformers)}")
    diff = tuple(r for r in sorted(s1.transformers) if s1.transformers[r] != s2.transformers[r])
    if diff:
        return Equivalence(False, f"summary transformers differ for {', '.join(diff)}", diff)
    return Equivalence(True, "same summary transformers")


def equivalent(n1: Negotiation, n2: Negotiation, budget: int = DEFAULT_BUDGET) -> Equivalence:
    if n1.domain != n2.domain:
        raise ValueError("equivalence needs the same agents and state spaces")
    return compare_summaries(summarize_statespace(n1, budget), summarize_statespace(n2, budget))
