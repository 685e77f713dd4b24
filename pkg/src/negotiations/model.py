"""Negotiations, atoms, party-local transformers and the relation algebra on Q_A.

Global states are tuples ordered by the canonical agent ordering (sorted agent
names).  Relations on the global product are stored as one successor bitmask
per global state, which keeps composition and closure exact and cheap for the
desk-scale state spaces this package targets.
"""

from __future__ import annotations

import itertools
import math
from dataclasses import dataclass
from functools import cached_property
from typing import Iterable, Iterator, Mapping

State = tuple[str, ...]
Pair = tuple[State, State]
Triple = tuple[str, str, str]


class ModelError(ValueError):
    """Raised when an operation is applied to an ill-formed model."""


class DomainMismatch(ModelError):
    pass


@dataclass(frozen=True)
class Domain:
    """The product of the agents' state spaces, in canonical agent order."""

    agents: tuple[str, ...]
    spaces: tuple[tuple[str, ...], ...]

    @classmethod
    def of(cls, spaces: Mapping[str, Iterable[str]]) -> Domain:
        agents = tuple(sorted(spaces))
        return cls(agents, tuple(tuple(spaces[a]) for a in agents))

    @cached_property
    def size(self) -> int:
        return math.prod(len(s) for s in self.spaces)

    @cached_property
    def _positions(self) -> tuple[dict[str, int], ...]:
        return tuple({q: i for i, q in enumerate(space)} for space in self.spaces)

    @cached_property
    def _strides(self) -> tuple[int, ...]:
        strides = []
        acc = 1
        for space in reversed(self.spaces):
            strides.append(acc)
            acc *= len(space)
        return tuple(reversed(strides))

    @cached_property
    def states(self) -> tuple[State, ...]:
        """All global states; position in this tuple is the state's index."""
        return tuple(itertools.product(*self.spaces))

    def index(self, state: State) -> int:
        try:
            return sum(
                pos[q] * stride for pos, q, stride in zip(self._positions, state, self._strides, strict=True)
            )
        except (KeyError, ValueError) as exc:
            raise ModelError(f"{state!r} is not a state of {self.agents}") from exc

    def state(self, index: int) -> State:
        return self.states[index]


def _bits(mask: int) -> Iterator[int]:
    while mask:
        low = mask & -mask
        yield low.bit_length() - 1
        mask ^= low


@dataclass(frozen=True)
class Relation:
    """A binary relation on the global states of a domain (a TransformerRelation)."""

    domain: Domain
    rows: tuple[int, ...]

    @classmethod
    def empty(cls, domain: Domain) -> Relation:
        return cls(domain, (0,) * domain.size)

    @classmethod
    def identity(cls, domain: Domain) -> Relation:
        return cls(domain, tuple(1 << i for i in range(domain.size)))

    @classmethod
    def from_pairs(cls, domain: Domain, pairs: Iterable[Pair]) -> Relation:
        rows = [0] * domain.size
        for q, q2 in pairs:
            rows[domain.index(q)] |= 1 << domain.index(q2)
        return cls(domain, tuple(rows))

    def pairs(self) -> set[Pair]:
        st = self.domain.states
        return {(st[i], st[j]) for i, row in enumerate(self.rows) for j in _bits(row)}

    def sorted_pairs(self) -> list[Pair]:
        st = self.domain.states
        return [(st[i], st[j]) for i, row in enumerate(self.rows) for j in sorted(_bits(row))]

    def __len__(self) -> int:
        return sum(row.bit_count() for row in self.rows)

    def __contains__(self, pair: Pair) -> bool:
        q, q2 = pair
        return bool(self.rows[self.domain.index(q)] >> self.domain.index(q2) & 1)

    def image(self, state: State) -> set[State]:
        st = self.domain.states
        return {st[j] for j in _bits(self.rows[self.domain.index(state)])}

    def is_left_total(self) -> bool:
        return all(self.rows)

    def _check(self, other: Relation) -> None:
        if self.domain != other.domain:
            raise DomainMismatch(f"relations over {self.domain.agents} and {other.domain.agents}")

    def compose(self, other: Relation) -> Relation:
        """Relational concatenation: first ``self``, then ``other``."""
        self._check(other)
        out = []
        for row in self.rows:
            acc = 0
            for j in _bits(row):
                acc |= other.rows[j]
            out.append(acc)
        return Relation(self.domain, tuple(out))

    def union(self, other: Relation) -> Relation:
        self._check(other)
        return Relation(self.domain, tuple(a | b for a, b in zip(self.rows, other.rows)))

    def star(self) -> Relation:
        """Reflexive-transitive closure (Warshall on bit rows)."""
        rows = [row | (1 << i) for i, row in enumerate(self.rows)]
        for k in range(len(rows)):
            bit, rk = 1 << k, rows[k]
            for i, row in enumerate(rows):
                if row & bit:
                    rows[i] = row | rk
        return Relation(self.domain, tuple(rows))

    __matmul__ = compose
    __or__ = union


def compose(a: Relation, b: Relation) -> Relation:
    return a.compose(b)


def union(a: Relation, b: Relation) -> Relation:
    return a.union(b)


def star(a: Relation) -> Relation:
    return a.star()


@dataclass(frozen=True)
class Transformer:
    """A relation over the party-local state tuples of an atom.

    Only party coordinates are stored, so the lifted global relation leaves
    every other agent untouched by construction.
    """

    parties: tuple[str, ...]
    pairs: frozenset[Pair]

    @classmethod
    def of(cls, parties: Iterable[str], pairs: Iterable[Pair]) -> Transformer:
        return cls(tuple(sorted(parties)), frozenset((tuple(q), tuple(q2)) for q, q2 in pairs))

    @classmethod
    def identity(cls, parties: Iterable[str], spaces: Mapping[str, Iterable[str]]) -> Transformer:
        parties = tuple(sorted(parties))
        return cls(parties, frozenset((q, q) for q in itertools.product(*(spaces[a] for a in parties))))

    @cached_property
    def successors(self) -> dict[State, tuple[State, ...]]:
        out: dict[State, list[State]] = {}
        for q, q2 in self.pairs:
            out.setdefault(q, []).append(q2)
        return {q: tuple(sorted(v)) for q, v in out.items()}

    def local_states(self, spaces: Mapping[str, Iterable[str]]) -> Iterator[State]:
        return itertools.product(*(tuple(spaces[a]) for a in self.parties))

    def missing_inputs(self, spaces: Mapping[str, Iterable[str]]) -> list[State]:
        """Party-local inputs without any output (violations of left-totality)."""
        return [q for q in self.local_states(spaces) if q not in self.successors]

    def is_identity(self, spaces: Mapping[str, Iterable[str]]) -> bool:
        return self == Transformer.identity(self.parties, spaces)

    def lift(self, domain: Domain) -> Relation:
        try:
            where = [domain.agents.index(a) for a in self.parties]
        except ValueError as exc:
            raise ModelError(f"transformer parties {self.parties} not all in {domain.agents}") from exc
        rows = []
        succ = self.successors
        for state in domain.states:
            row = 0
            for out in succ.get(tuple(state[i] for i in where), ()):
                target = list(state)
                for i, q in zip(where, out):
                    target[i] = q
                row |= 1 << domain.index(tuple(target))
            rows.append(row)
        return Relation(domain, tuple(rows))

    def extend(self, parties: Iterable[str], spaces: Mapping[str, Iterable[str]]) -> Transformer:
        """The same transformation over a larger party set; extra parties are kept fixed."""
        parties = tuple(sorted(set(parties) | set(self.parties)))
        if parties == self.parties:
            return self
        extra = [a for a in parties if a not in self.parties]
        own = [self.parties.index(a) if a in self.parties else None for a in parties]
        out = set()
        for fixed in itertools.product(*(tuple(spaces[a]) for a in extra)):
            env = dict(zip(extra, fixed))
            for q, q2 in self.pairs:
                out.add((
                    tuple(env[a] if i is None else q[i] for a, i in zip(parties, own)),
                    tuple(env[a] if i is None else q2[i] for a, i in zip(parties, own)),
                ))
        return Transformer(parties, frozenset(out))

    def then(self, other: Transformer) -> Transformer:
        """Party-local composition: first ``self``, then ``other`` (same parties)."""
        if self.parties != other.parties:
            raise DomainMismatch(f"transformers over {self.parties} and {other.parties}")
        succ = other.successors
        return Transformer(self.parties, frozenset((q, q3) for q, q2 in self.pairs for q3 in succ.get(q2, ())))

    def union(self, other: Transformer) -> Transformer:
        if self.parties != other.parties:
            raise DomainMismatch(f"transformers over {self.parties} and {other.parties}")
        return Transformer(self.parties, self.pairs | other.pairs)


@dataclass(frozen=True)
class Atom:
    id: str
    parties: frozenset[str]
    outcomes: tuple[str, ...]
    delta: Mapping[str, Transformer]

    @property
    def party_order(self) -> tuple[str, ...]:
        return tuple(sorted(self.parties))


@dataclass(frozen=True)
class Negotiation:
    """A negotiation (N, n0, nf, X) over agents with finite state spaces.

    ``transitions`` maps every triple (atom, agent, outcome) of T(N) to the set
    of atoms the agent is ready for next.  Outcome order within an atom is
    significant: it fixes exploration order and therefore witnesses.
    """

    agents: Mapping[str, tuple[str, ...]]
    atoms: Mapping[str, Atom]
    initial: str
    final: str
    transitions: Mapping[Triple, frozenset[str]]

    @cached_property
    def domain(self) -> Domain:
        return Domain.of(self.agents)

    @cached_property
    def agent_order(self) -> tuple[str, ...]:
        return tuple(sorted(self.agents))

    @cached_property
    def atom_order(self) -> tuple[str, ...]:
        return tuple(sorted(self.atoms))

    def X(self, atom: str, agent: str, outcome: str) -> frozenset[str]:
        return self.transitions[atom, agent, outcome]

    def triples(self) -> Iterator[Triple]:
        """T(N) in canonical order: atom id, outcome (declared order), agent."""
        for n in self.atom_order:
            atom = self.atoms[n]
            for r in atom.outcomes:
                for a in atom.party_order:
                    yield n, a, r

    def is_terminal(self, atom: str, outcome: str) -> bool:
        """True when the outcome leaves every party ready for nothing."""
        return all(not self.transitions.get((atom, a, outcome)) for a in self.atoms[atom].parties)

    def final_outcomes(self) -> tuple[str, ...]:
        """Names of outcomes that lead to the final marking, sorted.

        For a negotiation in the strict form these are exactly the outcomes of
        the final atom; reduced forms may carry them on other all-party atoms.
        """
        return tuple(sorted({r for n, atom in self.atoms.items() for r in atom.outcomes if self.is_terminal(n, r)}))

    def transformer(self, atom: str, outcome: str) -> Transformer:
        return self.atoms[atom].delta[outcome]


@dataclass(frozen=True)
class Violation:
    message: str
    locus: tuple = ()

    def __str__(self) -> str:
        return self.message


def validate(n: Negotiation, generalized: bool = False) -> list[Violation]:
    """Every structural violation of ``n``; an empty list means valid.

    With ``generalized`` the terminal-outcome condition is relaxed to the form
    produced by the reduction rules: an outcome may leave all parties of an
    all-agent atom ready for nothing even if that atom is not the final one.
    """
    out: list[Violation] = []

    def bad(message: str, *locus) -> None:
        out.append(Violation(message, locus))

    if not n.agents:
        bad("negotiation has no agents", "agents")
    for a, space in n.agents.items():
        if not a:
            bad("empty agent name", "agents")
        if not space:
            bad(f"agent {a} has an empty state space", "agent", a)
        if len(set(space)) != len(space):
            bad(f"agent {a} has duplicate states", "agent", a)

    all_agents = set(n.agents)
    for key, atom in n.atoms.items():
        if key != atom.id:
            bad(f"atom registered as {key} has id {atom.id}", "atom", key)
        if not atom.parties:
            bad(f"atom {key} has no parties", "atom", key)
        unknown = atom.parties - all_agents
        if unknown:
            bad(f"atom {key} has unknown parties {sorted(unknown)}", "atom", key)
        if not atom.outcomes:
            bad(f"atom {key} has no outcomes", "atom", key)
        if len(set(atom.outcomes)) != len(atom.outcomes):
            bad(f"atom {key} has duplicate outcomes", "atom", key)
        for r in atom.outcomes:
            t = atom.delta.get(r)
            if t is None:
                bad(f"atom {key} has no transformer for outcome {r}", "transformer", key, r)
                continue
            if t.parties != atom.party_order:
                bad(f"transformer of ({key}, {r}) is over {list(t.parties)}, not the parties of {key}",
                    "transformer", key, r)
                continue
            if unknown:
                continue
            spaces = n.agents
            width = len(t.parties)
            for q, q2 in t.pairs:
                if len(q) != width or len(q2) != width or any(
                    x not in spaces[a] for a, x in zip(t.parties * 2, q + q2)
                ):
                    bad(f"transformer of ({key}, {r}) mentions a state outside the parties' spaces",
                        "transformer", key, r)
                    break
            else:
                missing = t.missing_inputs(spaces)
                if missing:
                    bad(f"transformer of ({key}, {r}) is not left-total: no output for {missing[0]}",
                        "transformer", key, r)
        for r in set(atom.delta) - set(atom.outcomes):
            bad(f"atom {key} has a transformer for unknown outcome {r}", "transformer", key, r)

    for which, name in (("initial", n.initial), ("final", n.final)):
        if name not in n.atoms:
            bad(f"{which} atom {name} does not exist", which)
            continue
        for a in sorted(all_agents - n.atoms[name].parties):
            bad(f"agent {a} not party of {which} atom", which, a)

    expected = {
        (k, a, r) for k, atom in n.atoms.items() for a in atom.parties for r in atom.outcomes
    }
    for t in sorted(expected - set(n.transitions)):
        bad(f"no transition set for {t}", "transition", t)
    for t in sorted(set(n.transitions) - expected):
        bad(f"transition {t} is outside T(N)", "transition", t)

    for t in sorted(set(n.transitions) & expected):
        k, a, r = t
        targets = n.transitions[t]
        for m in sorted(targets):
            if m not in n.atoms:
                bad(f"transition {t} targets unknown atom {m}", "transition", t)
            elif a not in n.atoms[m].parties:
                bad(f"transition {t} targets {m}, which has no port for {a}", "transition", t)
        if not generalized:
            if k == n.final and targets:
                bad(f"non-empty transition set on final atom at {t}", "transition", t)
            elif k != n.final and not targets:
                bad(f"empty transition set on non-final atom {k} at {t}", "transition", t)

    if generalized:
        for k, atom in n.atoms.items():
            for r in atom.outcomes:
                sets = [n.transitions.get((k, a, r)) for a in atom.parties]
                if any(s is None for s in sets):
                    continue
                empties = sum(1 for s in sets if not s)
                if 0 < empties < len(sets):
                    bad(f"outcome ({k}, {r}) leaves some but not all parties with empty sets", "atom", k)
                elif empties and atom.parties != all_agents:
                    bad(f"terminal outcome ({k}, {r}) on atom without all agents", "atom", k)
        if n.final in n.atoms and n.atoms[n.final].outcomes and not any(
            n.is_terminal(n.final, r) for r in n.atoms[n.final].outcomes
            if all((n.final, a, r) in n.transitions for a in n.atoms[n.final].parties)
        ):
            bad(f"final atom {n.final} has no terminal outcome", "final")
    return out


def lift(t: Transformer, n: Negotiation) -> Relation:
    """The global relation of a party-local transformer over ``n``'s agents."""
    return t.lift(n.domain)
