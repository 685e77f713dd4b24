"""Syntactic reduction: merge, shortcut, d-shortcut and useless-arc rules.

Every rule consumes a negotiation and returns a new one.  Candidate lists are
in canonical order (atoms by id, outcomes in declared order, other atoms by
id) and the strategies always apply the first admissible candidate, so
reductions and their traces are reproducible.

Outcomes that lead every party to the final marking ("terminal" outcomes)
keep the name of the final outcome they stand for.  This is what lets a fully
reduced negotiation be compared outcome by outcome with its source.
"""

from __future__ import annotations

from collections import deque
from dataclasses import dataclass, field, replace
from typing import Mapping, Sequence

from .analysis import classify, is_acyclic, longest_paths
from .model import Negotiation, validate
from .semantics import DEFAULT_BUDGET, reach

MERGE = "merge"
SHORTCUT = "shortcut"
D_SHORTCUT = "d-shortcut"
USELESS_ARC = "useless-arc"
RULES = (MERGE, SHORTCUT, D_SHORTCUT, USELESS_ARC)


class RuleError(ValueError):
    """A rule was applied with parameters that do not satisfy its guard."""


class ClassificationError(ValueError):
    """A strategy was called on a negotiation outside its class."""


@dataclass(frozen=True)
class RuleApplication:
    rule: str
    params: tuple[str, ...]
    fresh: Mapping[str, str] = field(default_factory=dict)
    renamed: Mapping[str, str] = field(default_factory=dict)
    atoms_before: int = 0
    atoms_after: int = 0


@dataclass
class ReductionTrace:
    source: Negotiation
    applications: list[RuleApplication]
    result: Negotiation

    def count(self, rule: str) -> int:
        return sum(1 for app in self.applications if app.rule == rule)


@dataclass(frozen=True)
class Metrics:
    out: int
    shoc: int
    shoc_per_pair: Mapping[tuple[str, str], int]


def _fresh(name: str, taken: set[str]) -> str:
    while name in taken:
        name += "'"
    return name


def _check(n: Negotiation, debug: bool) -> Negotiation:
    if debug:
        problems = validate(n, generalized=True)
        if problems:
            raise AssertionError("rule produced an invalid negotiation: " + "; ".join(map(str, problems)))
    return n


# -- merge ------------------------------------------------------------------

def _mergeable(n: Negotiation, atom: str, r1: str, r2: str) -> bool:
    at = n.atoms[atom]
    return (
        r1 != r2
        and r1 in at.outcomes and r2 in at.outcomes
        # merging final outcomes would change the set of final outcomes
        and not n.is_terminal(atom, r1)
        and all(n.X(atom, a, r1) == n.X(atom, a, r2) for a in at.parties)
    )


def find_merge(n: Negotiation) -> list[tuple[str, str, str]]:
    found = []
    for k in n.atom_order:
        outs = sorted(n.atoms[k].outcomes)
        for i, r1 in enumerate(outs):
            for r2 in outs[i + 1:]:
                if _mergeable(n, k, r1, r2):
                    found.append((k, r1, r2))
    return found


def _merge(n: Negotiation, atom: str, r1: str, r2: str) -> tuple[Negotiation, RuleApplication]:
    if atom not in n.atoms or not _mergeable(n, atom, r1, r2):
        raise RuleError(f"merge guard fails for ({atom}, {r1}, {r2})")
    r1, r2 = sorted((r1, r2))
    at = n.atoms[atom]
    rf = _fresh(f"merge({r1},{r2})", set(at.outcomes))
    outcomes = []
    for r in at.outcomes:
        if r in (r1, r2):
            if rf not in outcomes:
                outcomes.append(rf)
        else:
            outcomes.append(r)
    delta = {r: t for r, t in at.delta.items() if r not in (r1, r2)}
    delta[rf] = at.delta[r1].union(at.delta[r2])
    transitions = {t: s for t, s in n.transitions.items() if not (t[0] == atom and t[2] in (r1, r2))}
    for a in at.parties:
        transitions[atom, a, rf] = n.X(atom, a, r1)
    atoms = dict(n.atoms)
    atoms[atom] = replace(at, outcomes=tuple(outcomes), delta=delta)
    result = replace(n, atoms=atoms, transitions=transitions)
    return result, RuleApplication(MERGE, (atom, r1, r2), {"merged": rf}, {}, len(n.atoms), len(result.atoms))


def apply_merge(n: Negotiation, atom: str, r1: str, r2: str) -> Negotiation:
    return _merge(n, atom, r1, r2)[0]


# -- shortcut ---------------------------------------------------------------

def unconditionally_enables(n: Negotiation, atom: str, r: str, target: str) -> bool:
    at, tg = n.atoms[atom], n.atoms[target]
    return at.parties >= tg.parties and all(n.X(atom, a, r) == {target} for a in tg.parties)


def _shortcut_guard(n: Negotiation, atom: str, r: str, target: str) -> bool:
    if atom not in n.atoms or target not in n.atoms or target == atom or r not in n.atoms[atom].outcomes:
        return False
    if not unconditionally_enables(n, atom, r, target):
        return False
    # other ways into the target, including other outcomes of `atom` itself
    others = [t for t, s in n.transitions.items() if (t[0], t[2]) != (atom, r) and target in s]
    return not others or any(n.transitions[t] == {target} for t in others)


def find_shortcut(n: Negotiation) -> list[tuple[str, str, str]]:
    found = []
    for k in n.atom_order:
        at = n.atoms[k]
        for r in at.outcomes:
            targets = set().union(*(n.X(k, a, r) for a in at.parties))
            for m in sorted(targets):
                if _shortcut_guard(n, k, r, m):
                    found.append((k, r, m))
    return found


def find_d_shortcut(n: Negotiation) -> list[tuple[str, str, str]]:
    """Shortcut candidates whose target has one outcome (or is the final atom)."""
    return [c for c in find_shortcut(n) if _d_condition(n, c[2])]


def _d_condition(n: Negotiation, target: str) -> bool:
    return len(n.atoms[target].outcomes) <= 1 or target == n.final


def _rename_outcome(atoms: dict, transitions: dict, atom: str, old: str, new: str) -> None:
    at = atoms[atom]
    atoms[atom] = replace(
        at,
        outcomes=tuple(new if r == old else r for r in at.outcomes),
        delta={(new if r == old else r): t for r, t in at.delta.items()},
    )
    for a in at.parties:
        transitions[atom, a, new] = transitions.pop((atom, a, old))


def _shortcut(n: Negotiation, atom: str, r: str, target: str, rule: str = SHORTCUT
              ) -> tuple[Negotiation, RuleApplication]:
    if not _shortcut_guard(n, atom, r, target):
        raise RuleError(f"shortcut guard fails for ({atom}, {r}, {target})")
    if rule == D_SHORTCUT and not _d_condition(n, target):
        raise RuleError(f"d-shortcut guard fails for ({atom}, {r}, {target}): target has several outcomes")
    at, tg = n.atoms[atom], n.atoms[target]
    atoms = dict(n.atoms)
    transitions = {t: s for t, s in n.transitions.items() if not (t[0] == atom and t[2] == r)}
    base = at.delta[r]
    old_x = {a: n.X(atom, a, r) for a in at.parties}

    terminal_names = {r2 for r2 in tg.outcomes if n.is_terminal(target, r2)}
    renamed: dict[str, str] = {}
    # a final outcome name already used by a non-final outcome of `atom` is moved aside
    for c in at.outcomes:
        if c != r and c in terminal_names and not n.is_terminal(atom, c):
            alias = _fresh(f"alias({c})", set(atoms[atom].outcomes) | terminal_names)
            _rename_outcome(atoms, transitions, atom, c, alias)
            renamed[c] = alias
    current = atoms[atom]
    taken = (set(current.outcomes) - {r}) | terminal_names

    delta = dict(current.delta)
    del delta[r]
    fresh: dict[str, str] = {}
    new_names: list[str] = []
    for r2 in tg.outcomes:
        composed = base.then(tg.delta[r2].extend(at.parties, n.agents))
        if r2 in terminal_names:
            name = r2
            if name in delta:
                # same final outcome already reachable from `atom`: one outcome carries both
                delta[name] = delta[name].union(composed)
                fresh[r2] = name
                continue
        else:
            name = _fresh(f"via({r};{r2})", taken)
        taken.add(name)
        fresh[r2] = name
        new_names.append(name)
        delta[name] = composed
        for a in at.parties:
            transitions[atom, a, name] = n.X(target, a, r2) if a in tg.parties else old_x[a]

    i = current.outcomes.index(r)
    outcomes = current.outcomes[:i] + tuple(new_names) + current.outcomes[i + 1:]
    atoms[atom] = replace(current, outcomes=outcomes, delta=delta)

    final = n.final
    if target != n.initial and not any(target in s for s in transitions.values()):
        del atoms[target]
        transitions = {t: s for t, s in transitions.items() if t[0] != target}
        if target == n.final:
            final = atom
    result = replace(n, atoms=atoms, transitions=transitions, final=final)
    return result, RuleApplication(rule, (atom, r, target), fresh, renamed, len(n.atoms), len(result.atoms))


def apply_shortcut(n: Negotiation, atom: str, r: str, target: str) -> Negotiation:
    return _shortcut(n, atom, r, target)[0]


def apply_d_shortcut(n: Negotiation, atom: str, r: str, target: str) -> Negotiation:
    return _shortcut(n, atom, r, target, D_SHORTCUT)[0]


# -- useless arc ------------------------------------------------------------

def _useless_guard(n: Negotiation, atom: str, a: str, r: str, keep: str, drop: str) -> bool:
    if atom not in n.atoms or keep not in n.atoms or drop not in n.atoms or keep == drop:
        return False
    at = n.atoms[atom]
    if a not in at.parties or r not in at.outcomes:
        return False
    both = n.atoms[keep].parties & n.atoms[drop].parties
    if a not in both or not {keep, drop} <= n.X(atom, a, r):
        return False
    return any(n.X(atom, b, r) == {keep} for b in sorted(both & at.parties))


def find_useless_arc(n: Negotiation) -> list[tuple[str, str, str, str, str]]:
    found = []
    for k in n.atom_order:
        at = n.atoms[k]
        for r in at.outcomes:
            for a in at.party_order:
                targets = sorted(n.X(k, a, r))
                for keep in targets:
                    for drop in targets:
                        if _useless_guard(n, k, a, r, keep, drop):
                            found.append((k, a, r, keep, drop))
    return found


def _useless_arc(n: Negotiation, atom: str, a: str, r: str, keep: str, drop: str
                 ) -> tuple[Negotiation, RuleApplication]:
    if not _useless_guard(n, atom, a, r, keep, drop):
        raise RuleError(f"useless-arc guard fails for ({atom}, {a}, {r}, {keep}, {drop})")
    transitions = dict(n.transitions)
    transitions[atom, a, r] = n.X(atom, a, r) - {drop}
    result = replace(n, transitions=transitions)
    return result, RuleApplication(USELESS_ARC, (atom, a, r, keep, drop), {}, {}, len(n.atoms), len(result.atoms))


def apply_useless_arc(n: Negotiation, atom: str, a: str, r: str, keep: str, drop: str) -> Negotiation:
    return _useless_arc(n, atom, a, r, keep, drop)[0]


# -- application by name, replay ---------------------------------------------

def apply_rule(n: Negotiation, rule: str, params: Sequence[str]) -> tuple[Negotiation, RuleApplication]:
    if rule == MERGE:
        return _merge(n, *params)
    if rule in (SHORTCUT, D_SHORTCUT):
        return _shortcut(n, *params, rule=rule)
    if rule == USELESS_ARC:
        return _useless_arc(n, *params)
    raise RuleError(f"unknown rule {rule}")


def find_candidates(n: Negotiation, rule: str) -> list[tuple[str, ...]]:
    return {
        MERGE: find_merge, SHORTCUT: find_shortcut, D_SHORTCUT: find_d_shortcut, USELESS_ARC: find_useless_arc,
    }[rule](n)


def replay(source: Negotiation, applications: Sequence[RuleApplication], debug: bool = False) -> Negotiation:
    """Re-apply recorded rule applications; fails if any fresh name or atom count differs."""
    cur = source
    for i, app in enumerate(applications):
        cur, again = apply_rule(cur, app.rule, app.params)
        _check(cur, debug)
        if (dict(again.fresh), dict(again.renamed), again.atoms_before, again.atoms_after) != (
            dict(app.fresh), dict(app.renamed), app.atoms_before, app.atoms_after
        ):
            raise RuleError(f"application {i} ({app.rule} {app.params}) does not replay identically")
    return cur


# -- strategies -------------------------------------------------------------

def reduce_weakly_deterministic(n: Negotiation, debug: bool = False, limit: int = 100_000
                                ) -> tuple[Negotiation, ReductionTrace]:
    """Apply shortcut and useless-arc rules to a fixpoint.

    A single remaining atom means the source was sound and the result is its
    summary; a fixpoint with several atoms means the source was unsound.
    """
    c = classify(n)
    if not (c.acyclic and c.weakly_deterministic):
        raise ClassificationError("reduction needs an acyclic, weakly deterministic negotiation")
    trace = ReductionTrace(n, [], n)
    cur = n
    while len(cur.atoms) > 1:
        if len(trace.applications) >= limit:
            raise RuntimeError(f"no fixpoint after {limit} rule applications")
        cands = find_shortcut(cur)
        if cands:
            cur, app = _shortcut(cur, *cands[0])
        else:
            arcs = find_useless_arc(cur)
            if not arcs:
                break
            cur, app = _useless_arc(cur, *arcs[0])
        _check(cur, debug)
        trace.applications.append(app)
    trace.result = cur
    return cur, trace


def reduce_sdan(n: Negotiation, debug: bool = False) -> tuple[Negotiation, ReductionTrace, Metrics]:
    """Reduce a deterministic acyclic negotiation with merge and d-shortcut.

    Strategy: apply every available merge, then one d-shortcut whose target
    has the shortest longest-path to the end of the graph; repeat.
    """
    c = classify(n)
    if not (c.acyclic and c.deterministic):
        raise ClassificationError("SDAN reduction needs a deterministic acyclic negotiation")
    bounds = metrics(n)
    trace = ReductionTrace(n, [], n)
    cur = n
    while True:
        merges = find_merge(cur)
        while merges:
            cur, app = _merge(cur, *merges[0])
            _check(cur, debug)
            trace.applications.append(app)
            merges = find_merge(cur)
        cands = find_d_shortcut(cur)
        if not cands:
            break
        depth = longest_paths(cur)
        best = min(range(len(cands)), key=lambda i: (depth[cands[i][2]], i))
        cur, app = _shortcut(cur, *cands[best], rule=D_SHORTCUT)
        _check(cur, debug)
        trace.applications.append(app)
    trace.result = cur
    return cur, trace, bounds


# -- bound metrics ----------------------------------------------------------

def metrics(n: Negotiation, budget: int = DEFAULT_BUDGET) -> Metrics:
    """Out(N) and Shoc(N).

    shoc(n, r) is one less than the length of a shortest maximal occurrence
    sequence containing (n, r); pairs that never occur are left out.
    """
    if not is_acyclic(n):
        raise ValueError("Out/Shoc are only defined here for acyclic negotiations")
    out = sum(1 for k, at in n.atoms.items() for r in at.outcomes if not n.is_terminal(k, r))
    g = reach(n, budget)
    size = len(g.markings)
    succ = g.out_edges()
    pred = g.in_edges()

    start = [None] * size
    start[g.initial] = 0
    queue = deque([g.initial])
    while queue:
        v = queue.popleft()
        for e in succ[v]:
            if start[e.dst] is None:
                start[e.dst] = start[v] + 1
                queue.append(e.dst)

    finish = [None] * size
    sinks = [v for v in range(size) if not succ[v]]
    for v in sinks:
        finish[v] = 0
    queue = deque(sinks)
    while queue:
        v = queue.popleft()
        for e in pred[v]:
            if finish[e.src] is None:
                finish[e.src] = finish[v] + 1
                queue.append(e.src)

    per_pair: dict[tuple[str, str], int] = {}
    for e in g.edges:
        length = start[e.src] + 1 + finish[e.dst]
        key = (e.atom, e.outcome)
        if key not in per_pair or length - 1 < per_pair[key]:
            per_pair[key] = length - 1
    return Metrics(out, sum(per_pair.values()), per_pair)


def transition_count(n: Negotiation) -> int:
    return sum(len(s) for s in n.transitions.values())


__all__ = [
    "RULES", "MERGE", "SHORTCUT", "D_SHORTCUT", "USELESS_ARC",
    "RuleError", "ClassificationError", "RuleApplication", "ReductionTrace", "Metrics",
    "find_merge", "apply_merge", "unconditionally_enables", "find_shortcut", "apply_shortcut",
    "find_d_shortcut", "apply_d_shortcut", "find_useless_arc", "apply_useless_arc",
    "apply_rule", "find_candidates", "replay", "reduce_weakly_deterministic", "reduce_sdan", "metrics",
]
