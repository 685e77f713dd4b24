"""Instance constructors: the Father/Daughter/Mother family, the SAT
construction, chains and random sound deterministic acyclic negotiations."""

from __future__ import annotations

import itertools
import random
from dataclasses import dataclass
from typing import Iterable, Sequence

from .analysis import check_soundness, classify
from .model import Atom, Negotiation, Transformer

ANGRY = "angry"


class GeneratorError(ValueError):
    pass


def build(
    spaces: dict[str, Sequence[str]],
    atoms: Iterable[tuple[str, Iterable[str], Sequence[str]]],
    arcs: dict[tuple[str, str, str], Iterable[str]],
    initial: str,
    final: str,
    transformers: dict[tuple[str, str], Transformer] | None = None,
) -> Negotiation:
    """Assemble a negotiation; transformers default to the identity.

    ``arcs`` only needs entries for non-empty transition sets; every other
    triple of T(N) gets the empty set.
    """
    spaces = {a: tuple(str(q) for q in qs) for a, qs in spaces.items()}
    transformers = transformers or {}
    table = {}
    transitions = {}
    for k, parties, outcomes in atoms:
        parties = frozenset(parties)
        delta = {r: transformers.get((k, r)) or Transformer.identity(parties, spaces) for r in outcomes}
        table[k] = Atom(k, parties, tuple(outcomes), delta)
        for a in parties:
            for r in outcomes:
                transitions[k, a, r] = frozenset(arcs.get((k, a, r), ()))
    for t, targets in arcs.items():
        transitions.setdefault(t, frozenset(targets))
    return Negotiation(spaces, table, initial, final, transitions)


# -- Father / Daughter / Mother ---------------------------------------------

def _time_states(times: Sequence) -> tuple[str, ...]:
    if not times:
        raise GeneratorError("times must not be empty")
    states = tuple(str(t) for t in times)
    if len(set(states)) != len(states) or ANGRY in states:
        raise GeneratorError(f"times must be distinct and must not contain {ANGRY!r}")
    return states


def _agree(parties: tuple[str, str], times: tuple[str, ...]) -> dict[str, Transformer]:
    """yes / no / keep transformers of a two-party time negotiation.

    yes agrees on any time between the two proposals; no makes both angry.
    An angry party blocks agreement, so yes then leaves the states alone.
    """
    q = times + (ANGRY,)
    rank = {t: i for i, t in enumerate(times)}
    yes, no, keep = set(), set(), set()
    for x, y in itertools.product(q, q):
        no.add(((x, y), (ANGRY, ANGRY)))
        keep.add(((x, y), (x, y)))
        if x in rank and y in rank:
            lo, hi = sorted((rank[x], rank[y]))
            yes.update(((x, y), (times[i], times[i])) for i in range(lo, hi + 1))
        else:
            yes.add(((x, y), (x, y)))
    return {name: Transformer(parties, frozenset(pairs)) for name, pairs in
            (("yes", yes), ("no", no), ("keep", keep))}


def _fdm_parts(times: Sequence):
    states = _time_states(times)
    spaces = {a: states + (ANGRY,) for a in ("D", "F", "M")}
    fd = _agree(("D", "F"), states)
    dm = _agree(("D", "M"), states)
    atoms = [
        ("n0", "DFM", ["st"]),
        ("nFD", "DF", ["yes", "no", "am"]),
        ("nDM", "DM", ["yes", "no"]),
        ("nf", "DFM", ["r"]),
    ]
    arcs = {
        ("n0", "F", "st"): {"nFD"},
        ("n0", "D", "st"): {"nFD"},
        ("n0", "M", "st"): {"nDM", "nf"},
        ("nFD", "F", "yes"): {"nf"}, ("nFD", "D", "yes"): {"nf"},
        ("nFD", "F", "no"): {"nf"}, ("nFD", "D", "no"): {"nf"},
        ("nFD", "F", "am"): {"nf"}, ("nFD", "D", "am"): {"nDM"},
        ("nDM", "D", "yes"): {"nf"}, ("nDM", "M", "yes"): {"nf"},
        ("nDM", "D", "no"): {"nf"}, ("nDM", "M", "no"): {"nf"},
    }
    transformers = {
        ("nFD", "yes"): fd["yes"], ("nFD", "no"): fd["no"], ("nFD", "am"): fd["keep"],
        ("nDM", "yes"): dm["yes"], ("nDM", "no"): dm["no"],
    }
    return spaces, atoms, arcs, transformers


def gen_fdm(times: Sequence) -> Negotiation:
    """The acyclic Father/Daughter/Mother negotiation over the given times."""
    spaces, atoms, arcs, transformers = _fdm_parts(times)
    return build(spaces, atoms, arcs, "n0", "nf", transformers)


def gen_fdm_unsound(times: Sequence) -> Negotiation:
    """As gen_fdm, but Mother is only ready for nDM after the start."""
    spaces, atoms, arcs, transformers = _fdm_parts(times)
    arcs["n0", "M", "st"] = {"nDM"}
    return build(spaces, atoms, arcs, "n0", "nf", transformers)


def gen_pingpong(times: Sequence) -> Negotiation:
    """The cyclic ping-pong negotiation: Daughter is sent between Father and Mother."""
    spaces, atoms, arcs, transformers = _fdm_parts(times)
    atoms = [
        ("n0", "DFM", ["st"]),
        ("nFD", "DF", ["yes", "no", "am"]),
        ("nDM", "DM", ["yes", "no", "af"]),
        ("nD", "D", ["c", "gu"]),
        ("nf", "DFM", ["r"]),
    ]
    arcs.update({
        ("nFD", "F", "am"): {"nFD", "nf"},
        ("nDM", "D", "af"): {"nD"},
        ("nDM", "M", "af"): {"nDM", "nf"},
        ("nD", "D", "c"): {"nFD"},
        ("nD", "D", "gu"): {"nf"},
    })
    transformers["nDM", "af"] = _agree(("D", "M"), _time_states(times))["keep"]
    return build(spaces, atoms, arcs, "n0", "nf", transformers)


# -- chains -----------------------------------------------------------------

def gen_chain(k: int, agents: Sequence[str] = ("a",)) -> Negotiation:
    """k atoms with one outcome each, all agents moving through them in order."""
    if k < 1:
        raise GeneratorError("a chain needs at least one atom")
    names = [f"c{i}" for i in range(k - 1)] + ["cf"]
    spaces = {a: ("0",) for a in agents}
    atoms = [(name, agents, ["r"]) for name in names]
    arcs = {(names[i], a, "r"): {names[i + 1]} for i in range(k - 1) for a in agents}
    return build(spaces, atoms, arcs, names[0], names[-1])


# -- SAT construction -------------------------------------------------------

Literal = tuple[int, bool]


@dataclass(frozen=True)
class CnfFormula:
    num_vars: int
    clauses: tuple[frozenset[Literal], ...]

    def __post_init__(self):
        if self.num_vars < 1:
            raise GeneratorError("a formula needs at least one variable")
        for c in self.clauses:
            if not 1 <= len(c) <= 3:
                raise GeneratorError(f"clause {sorted(c)} must have 1 to 3 literals")
            for v, _ in c:
                if not 1 <= v <= self.num_vars:
                    raise GeneratorError(f"variable {v} out of range 1..{self.num_vars}")

    @classmethod
    def of(cls, num_vars: int, clauses: Iterable[Iterable[int]]) -> CnfFormula:
        """Build from DIMACS-style signed integers."""
        return cls(num_vars, tuple(frozenset((abs(x), x > 0) for x in c) for c in clauses))

    def is_tautology(self, j: int) -> bool:
        return any((v, not b) in self.clauses[j] for v, b in self.clauses[j])

    def satisfied_by(self, assignment: Sequence[bool]) -> bool:
        return all(any(assignment[v - 1] == b for v, b in c) for c in self.clauses)

    def satisfiable(self) -> bool:
        return any(self.satisfied_by(bits) for bits in itertools.product((False, True), repeat=self.num_vars))


def parse_dimacs(text: str) -> CnfFormula:
    num_vars = None
    clauses: list[list[int]] = []
    pending: list[int] = []
    for lineno, line in enumerate(text.splitlines(), 1):
        line = line.strip()
        if not line or line.startswith(("c", "%")):
            continue
        if line.startswith("p"):
            parts = line.split()
            if len(parts) != 4 or parts[1] != "cnf":
                raise GeneratorError(f"line {lineno}: invalid problem line {line!r}")
            num_vars = int(parts[2])
            continue
        if num_vars is None:
            raise GeneratorError(f"line {lineno}: clause before the 'p cnf' header")
        try:
            lits = [int(x) for x in line.split()]
        except ValueError as exc:
            raise GeneratorError(f"line {lineno}: {exc}") from exc
        for x in lits:
            if x == 0:
                clauses.append(pending)
                pending = []
            else:
                pending.append(x)
    if num_vars is None:
        raise GeneratorError("missing 'p cnf' header")
    if pending:
        raise GeneratorError("last clause is not terminated by 0")
    return CnfFormula.of(num_vars, clauses)


def gen_sat(f: CnfFormula) -> Negotiation:
    """The negotiation that is sound exactly when ``f`` is unsatisfiable.

    One agent per variable plus a judge J; every agent has a single internal
    state and every transformer is the identity.
    """
    if not f.clauses:
        raise GeneratorError("the construction needs at least one clause")
    for j in range(len(f.clauses)):
        if f.is_tautology(j):
            raise GeneratorError(f"clause {j + 1} is a tautology")
    xs = [f"X{i}" for i in range(1, f.num_vars + 1)]
    spaces = {a: ("0",) for a in xs + ["J"]}
    fal = [f"False_{j}" for j in range(1, len(f.clauses) + 1)]
    sets = [f"Set_x{i}" for i in range(1, f.num_vars + 1)]
    atoms = [("n0", xs + ["J"], ["st"]), ("nf", xs + ["J"], ["done"])]
    atoms += [(sets[i], [xs[i]], ["true", "false"]) for i in range(f.num_vars)]
    atoms += [(fal[j], sorted({xs[v - 1] for v, _ in c}) + ["J"], ["false"]) for j, c in enumerate(f.clauses)]
    arcs: dict[tuple[str, str, str], set[str]] = {("n0", "J", "st"): set(fal)}
    for i in range(f.num_vars):
        arcs["n0", xs[i], "st"] = {sets[i]}
        for value in (True, False):
            # X_i waits for every clause over x_i that this value does not satisfy
            unsat = {fal[j] for j, c in enumerate(f.clauses)
                     if any(v == i + 1 for v, _ in c) and (i + 1, value) not in c}
            arcs[sets[i], xs[i], "true" if value else "false"] = unsat | {"nf"}
    for j, c in enumerate(f.clauses):
        for a in sorted({xs[v - 1] for v, _ in c}) + ["J"]:
            arcs[fal[j], a, "false"] = {"nf"}
    return build(spaces, atoms, arcs, "n0", "nf")


# -- random sound deterministic acyclic negotiations -------------------------

MAX_RETRIES = 100


def _random_transformer(rng: random.Random, parties: tuple[str, ...], spaces) -> Transformer:
    pairs = set()
    local = list(itertools.product(*(spaces[a] for a in parties)))
    for q in local:
        for q2 in rng.sample(local, k=min(len(local), rng.choice((1, 1, 2)))):
            pairs.add((q, q2))
    return Transformer(parties, frozenset(pairs))


def _sdan_attempt(rng: random.Random, num_atoms: int, agents: list[str], outcomes_per_atom: int,
                  spaces, wild: bool) -> Negotiation:
    names = ["n0"] + [f"n{i}" for i in range(1, num_atoms - 1)] + (["nf"] if num_atoms > 1 else [])
    parties = {names[0]: tuple(agents), names[-1]: tuple(agents)}
    for k in names[1:-1]:
        size = rng.randint(1, len(agents))
        parties[k] = tuple(sorted(rng.sample(agents, size)))

    def later_with(i: int, a: str) -> list[str]:
        return [m for m in names[i + 1:] if a in parties[m]]

    atoms, arcs, transformers = [], {}, {}
    for i, k in enumerate(names):
        outs = ["f"] if k == "nf" else [f"r{j}" for j in range(outcomes_per_atom)]
        atoms.append((k, parties[k], outs))
        for r in outs:
            transformers[k, r] = _random_transformer(rng, parties[k], spaces)
            if k == names[-1]:
                continue
            route_freely = wild and rng.random() < 0.6
            for a in parties[k]:
                options = later_with(i, a)
                target = rng.choice(options) if route_freely else options[0]
                arcs[k, a, r] = {target}
    return build(spaces, atoms, arcs, names[0], names[-1], transformers)


def gen_random_sdan(seed: int, num_atoms: int, num_agents: int, outcomes_per_atom: int,
                    states_per_agent: int) -> Negotiation:
    """A random sound, deterministic, acyclic negotiation, reproducible from ``seed``.

    Non-final atoms get ``outcomes_per_atom`` outcomes; the final atom has one.
    Agents are routed forward to later atoms they take part in; candidates that
    turn out unsound are rejected.  After MAX_RETRIES rejections the instance
    falls back to routing every agent to its next atom, which is always sound.
    """
    for name, value in (("num_atoms", num_atoms), ("num_agents", num_agents),
                        ("outcomes_per_atom", outcomes_per_atom), ("states_per_agent", states_per_agent)):
        if value < 1:
            raise GeneratorError(f"{name} must be at least 1")
    rng = random.Random(seed)
    agents = [f"a{i}" for i in range(num_agents)]
    spaces = {a: tuple(f"s{j}" for j in range(states_per_agent)) for a in agents}
    for _ in range(MAX_RETRIES):
        n = _sdan_attempt(rng, num_atoms, agents, outcomes_per_atom, spaces, wild=True)
        if check_soundness(n).sound:
            return n
    n = _sdan_attempt(rng, num_atoms, agents, outcomes_per_atom, spaces, wild=False)
    assert check_soundness(n).sound and classify(n).deterministic
    return n
