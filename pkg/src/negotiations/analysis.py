"""Soundness decision with witnesses, and structural classification."""

from __future__ import annotations

from collections import deque
from dataclasses import dataclass
from graphlib import CycleError, TopologicalSorter

from .model import Negotiation
from .semantics import DEFAULT_BUDGET, ReachabilityGraph, Step, reach


@dataclass(frozen=True)
class SoundnessVerdict:
    sound: bool
    unreached_atoms: frozenset[str]
    witness: tuple[Step, ...] | None
    deadlock: bool = False  # witness ends in a deadlock rather than a livelock

    def describe(self) -> str:
        if self.sound:
            return "sound"
        parts = ["unsound"]
        if self.unreached_atoms:
            parts.append(f"never enabled: {', '.join(sorted(self.unreached_atoms))}")
        if self.witness is not None:
            seq = "".join(f"({k},{r})" for k, r in self.witness) or "(empty sequence)"
            kind = "deadlock" if self.deadlock else "final marking unreachable"
            parts.append(f"witness {seq} [{kind}]")
        return "; ".join(parts)


def can_finish(g: ReachabilityGraph) -> list[bool]:
    """For each vertex, whether the final marking is reachable from it."""
    ok = [False] * len(g.markings)
    if g.final is None:
        return ok
    inn = g.in_edges()
    ok[g.final] = True
    queue = deque([g.final])
    while queue:
        v = queue.popleft()
        for e in inn[v]:
            if not ok[e.src]:
                ok[e.src] = True
                queue.append(e.src)
    return ok


def soundness_of(n: Negotiation, g: ReachabilityGraph) -> SoundnessVerdict:
    unreached = frozenset(n.atoms) - g.labels()
    ok = can_finish(g)
    witness = None
    deadlock = False
    # vertices are in BFS discovery order, so the first failure is a shortest witness
    for v, good in enumerate(ok):
        if not good:
            witness = tuple(g.path_to(v))
            deadlock = not any(e.src == v for e in g.edges)
            break
    return SoundnessVerdict(not unreached and witness is None, unreached, witness, deadlock)


def check_soundness(n: Negotiation, budget: int = DEFAULT_BUDGET) -> SoundnessVerdict:
    """Decide soundness on the reachability graph.

    Condition (b) is checked as "the final marking is reachable from every
    reachable marking".
    """
    return soundness_of(n, reach(n, budget))


def atom_graph(n: Negotiation) -> dict[str, set[str]]:
    graph: dict[str, set[str]] = {k: set() for k in n.atom_order}
    for (k, _a, _r), targets in n.transitions.items():
        graph[k] |= targets
    return graph


def topological_order(n: Negotiation) -> list[str] | None:
    """Atoms in an order compatible with the atom graph, or None if it is cyclic."""
    graph = atom_graph(n)
    preds = {k: set() for k in graph}
    for k, succ in graph.items():
        for m in succ:
            preds[m].add(k)
    try:
        return list(TopologicalSorter(preds).static_order())
    except CycleError:
        return None


def is_acyclic(n: Negotiation) -> bool:
    return topological_order(n) is not None


def longest_paths(n: Negotiation) -> dict[str, int]:
    """Length (in edges) of the longest path leaving each atom; acyclic input only."""
    order = topological_order(n)
    if order is None:
        raise ValueError("longest paths are only defined for acyclic negotiations")
    graph = atom_graph(n)
    length: dict[str, int] = {}
    for k in reversed(order):
        length[k] = max((length[m] + 1 for m in graph[k]), default=0)
    return length


@dataclass(frozen=True)
class Classification:
    acyclic: bool
    deterministic_agents: frozenset[str]
    deterministic: bool
    weakly_deterministic: bool


def deterministic_agents(n: Negotiation) -> frozenset[str]:
    """Agents whose every non-terminal transition set is a singleton."""
    bad = {a for (_k, a, _r), targets in n.transitions.items() if len(targets) > 1}
    return frozenset(n.agents) - bad


def classify(n: Negotiation) -> Classification:
    det = deterministic_agents(n)
    weak = all(
        any(all(b in n.atoms[m].parties for m in targets) for b in det)
        for targets in n.transitions.values()
        if targets
    )
    return Classification(
        acyclic=is_acyclic(n),
        deterministic_agents=det,
        deterministic=det == frozenset(n.agents),
        weakly_deterministic=weak,
    )
