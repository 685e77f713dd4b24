"""Markings, small steps, occurrence sequences and the reachability graph."""

from __future__ import annotations

from collections import deque
from dataclasses import dataclass, field
from typing import Iterable, Iterator, Mapping, Sequence

from .model import Negotiation

DEFAULT_BUDGET = 1_000_000

Step = tuple[str, str]


class SemanticsError(ValueError):
    pass


class NotEnabled(SemanticsError):
    pass


class UnknownOutcome(SemanticsError):
    pass


class OccurrenceError(SemanticsError):
    """A replayed sequence hit a step that cannot occur."""

    def __init__(self, index: int, step: Step, reason: str):
        super().__init__(f"step {index} {step}: {reason}")
        self.index = index
        self.step = step


class ExplorationBudgetExceeded(RuntimeError):
    pass


@dataclass(frozen=True)
class Marking:
    """Ready sets, one per agent in canonical agent order."""

    ready: tuple[frozenset[str], ...]

    def is_empty(self) -> bool:
        return not any(self.ready)

    def key(self) -> tuple[tuple[str, ...], ...]:
        return tuple(tuple(sorted(s)) for s in self.ready)

    def as_dict(self, n: Negotiation) -> dict[str, frozenset[str]]:
        return dict(zip(n.agent_order, self.ready))

    def render(self, n: Negotiation) -> str:
        return " ".join(f"{a}:{{{','.join(sorted(s))}}}" for a, s in zip(n.agent_order, self.ready))


def marking(n: Negotiation, ready: Mapping[str, Iterable[str]]) -> Marking:
    return Marking(tuple(frozenset(ready.get(a, ())) for a in n.agent_order))


def initial_marking(n: Negotiation) -> Marking:
    return Marking(tuple(frozenset({n.initial}) for _ in n.agent_order))


def final_marking(n: Negotiation) -> Marking:
    return Marking(tuple(frozenset() for _ in n.agent_order))


def enabled(m: Marking, n: Negotiation) -> list[str]:
    """Atoms enabled at ``m``, sorted by id."""
    ready = m.as_dict(n)
    candidates = set().union(*m.ready) if m.ready else set()
    return sorted(k for k in candidates if k in n.atoms and all(k in ready[a] for a in n.atoms[k].parties))


def step(m: Marking, atom: str, outcome: str, n: Negotiation) -> Marking:
    if atom not in n.atoms:
        raise NotEnabled(f"unknown atom {atom}")
    at = n.atoms[atom]
    ready = m.as_dict(n)
    if not all(atom in ready[a] for a in at.parties):
        raise NotEnabled(f"atom {atom} not enabled")
    if outcome not in at.outcomes:
        raise UnknownOutcome(f"atom {atom} has no outcome {outcome}")
    return Marking(tuple(
        n.transitions[atom, a, outcome] if a in at.parties else s
        for a, s in zip(n.agent_order, m.ready)
    ))


def successors(m: Marking, n: Negotiation) -> Iterator[tuple[str, str, Marking]]:
    """Small steps from ``m`` in exploration order (atom id, then declared outcome order)."""
    for k in enabled(m, n):
        for r in n.atoms[k].outcomes:
            yield k, r, step(m, k, r, n)


def is_deadlock(m: Marking, n: Negotiation) -> bool:
    return not m.is_empty() and not enabled(m, n)


def run(n: Negotiation, seq: Sequence[Step]) -> Marking:
    m = initial_marking(n)
    for i, (k, r) in enumerate(seq):
        try:
            m = step(m, k, r, n)
        except SemanticsError as exc:
            raise OccurrenceError(i, (k, r), str(exc)) from exc
    return m


@dataclass(frozen=True)
class Edge:
    src: int
    atom: str
    outcome: str
    dst: int


@dataclass
class ReachabilityGraph:
    """Reachable markings (indexed in BFS discovery order) and small steps.

    Vertex 0 is the initial marking.  ``parent[v]`` is the index of the edge
    that first discovered ``v``, so following parents yields a BFS-shortest
    occurrence sequence.
    """

    markings: list[Marking]
    edges: list[Edge]
    parent: list[int | None]
    final: int | None
    index: dict[Marking, int] = field(repr=False)

    initial: int = 0

    def out_edges(self) -> list[list[Edge]]:
        out: list[list[Edge]] = [[] for _ in self.markings]
        for e in self.edges:
            out[e.src].append(e)
        return out

    def in_edges(self) -> list[list[Edge]]:
        inn: list[list[Edge]] = [[] for _ in self.markings]
        for e in self.edges:
            inn[e.dst].append(e)
        return inn

    def path_to(self, v: int) -> list[Step]:
        path = []
        while self.parent[v] is not None:
            e = self.edges[self.parent[v]]
            path.append((e.atom, e.outcome))
            v = e.src
        return path[::-1]

    def labels(self) -> set[str]:
        return {e.atom for e in self.edges}

    def to_text(self, n: Negotiation) -> str:
        lines = [f"vertex {i} {m.render(n)}" for i, m in enumerate(self.markings)]
        lines += [f"edge {e.src} {e.dst} {e.atom} {e.outcome}" for e in self.edges]
        lines.append(f"initial {self.initial}")
        lines.append(f"final {'-' if self.final is None else self.final}")
        return "\n".join(lines) + "\n"

    def to_dot(self, n: Negotiation) -> str:
        lines = ["digraph reachability {", "  rankdir=LR;"]
        for i, m in enumerate(self.markings):
            shape = "doublecircle" if i == self.final else "box"
            lines.append(f'  v{i} [shape={shape}, label="{m.render(n)}"];')
        for e in self.edges:
            lines.append(f'  v{e.src} -> v{e.dst} [label="({e.atom},{e.outcome})"];')
        lines.append("}")
        return "\n".join(lines) + "\n"


def reach(n: Negotiation, budget: int = DEFAULT_BUDGET) -> ReachabilityGraph:
    """Exhaustive BFS over markings reachable from the initial marking."""
    x0 = initial_marking(n)
    markings = [x0]
    index = {x0: 0}
    parent: list[int | None] = [None]
    edges: list[Edge] = []
    queue = deque([0])
    while queue:
        v = queue.popleft()
        for k, r, m2 in successors(markings[v], n):
            w = index.get(m2)
            if w is None:
                if len(markings) >= budget:
                    raise ExplorationBudgetExceeded(f"more than {budget} reachable markings")
                w = len(markings)
                index[m2] = w
                markings.append(m2)
                parent.append(len(edges))
                queue.append(w)
            edges.append(Edge(v, k, r, w))
    return ReachabilityGraph(markings, edges, parent, index.get(final_marking(n)), index)


def occurrence_sequences(n: Negotiation, max_length: int | None = None) -> Iterator[tuple[Step, ...]]:
    """All initial occurrence sequences, the empty one included.

    Finite only for acyclic negotiations; pass ``max_length`` otherwise.
    """
    def walk(m: Marking, prefix: tuple[Step, ...]) -> Iterator[tuple[Step, ...]]:
        yield prefix
        if max_length is not None and len(prefix) >= max_length:
            return
        for k, r, m2 in successors(m, n):
            yield from walk(m2, prefix + ((k, r),))

    return walk(initial_marking(n), ())
