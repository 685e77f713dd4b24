import random
from dataclasses import replace

import pytest

from corpus import HAND_WRITTEN, corpus
from negotiations.analysis import is_acyclic
from negotiations.generators import gen_fdm, gen_fdm_unsound, gen_pingpong
from negotiations.model import Relation, Transformer
from negotiations.reduction import reduce_weakly_deterministic
from negotiations.semantics import reach
from negotiations.summary import (EliminationStats, brute_force_summary, compare_summaries, equivalent,
                                  summarize_statespace)


def kleene_summary(n, r):
    """Path sum by iterating reachable (vertex, relation) sets to a fixpoint."""
    g = reach(n)
    labels = {(k, o): n.transformer(k, o).lift(n.domain) for k in n.atoms for o in n.atoms[k].outcomes}
    out = g.out_edges()
    at = {g.initial: Relation.identity(n.domain)}
    result = Relation.empty(n.domain)
    changed = True
    while changed:
        changed = False
        for v, rel in list(at.items()):
            for e in out[v]:
                step = rel @ labels[e.atom, e.outcome]
                if e.dst == g.final:
                    if e.outcome == r and (result | step) != result:
                        result, changed = result | step, True
                    continue
                old = at.get(e.dst, Relation.empty(n.domain))
                if (old | step) != old:
                    at[e.dst] = old | step
                    changed = True
    return result


def test_single_atom_identity():
    n = HAND_WRITTEN["chain2"]()
    single = replace(n, atoms={"n0": replace(n.atoms["n0"], delta={"r": Transformer.identity("ab", n.agents)})},
                     final="n0", transitions={("n0", "a", "r"): frozenset(), ("n0", "b", "r"): frozenset()})
    s = summarize_statespace(single)
    assert s.transformers == {"r": Relation.identity(single.domain)}
    assert brute_force_summary(single).transformers == s.transformers


def test_fdm_matches_brute_force():
    n = gen_fdm([8, 9, 10])
    assert summarize_statespace(n).transformers == brute_force_summary(n).transformers


def test_pingpong_matches_kleene_iteration():
    n = gen_pingpong([8, 9, 10])
    s = summarize_statespace(n)
    assert s.sound
    assert s.transformers["r"] == kleene_summary(n, "r")
    with pytest.raises(ValueError):
        brute_force_summary(n)


def test_cyclic_hand_cases_match_kleene_iteration():
    for name in ("self_loop", "two_atom_loop"):
        n = HAND_WRITTEN[name]()
        s = summarize_statespace(n)
        for r in n.final_outcomes():
            assert s.transformers[r] == kleene_summary(n, r)


def test_parallel_choice_is_a_union():
    n = HAND_WRITTEN["diamond"]()
    lab = {(k, r): n.transformer(k, r).lift(n.domain) for k in n.atoms for r in n.atoms[k].outcomes}
    expected = (lab["n0", "l"] @ lab["n1", "x"] | lab["n0", "r"] @ lab["n2", "x"]
                | lab["n0", "r"] @ lab["n2", "y"]) @ lab["nf", "r"]
    assert brute_force_summary(n).transformers == {"r": expected}
    assert summarize_statespace(n).transformers == {"r": expected}


def test_unsound_inputs_have_no_transformers():
    s = summarize_statespace(gen_fdm_unsound([8]))
    assert not s.sound and s.transformers is None


def test_equivalence_examples():
    bad1 = gen_fdm_unsound([8, 9])
    transitions = dict(gen_fdm([8, 9]).transitions)
    transitions["n0", "F", "st"] = frozenset({"nf"})
    bad2 = replace(gen_fdm([8, 9]), transitions=transitions)
    eq = equivalent(bad1, bad2)
    assert eq and eq.reason == "both unsound"

    n = gen_fdm([8, 9, 10])
    reduced, _ = reduce_weakly_deterministic(n)
    assert equivalent(n, reduced)

    atoms = dict(n.atoms)
    atoms["nFD"] = replace(atoms["nFD"], delta={**atoms["nFD"].delta, "no": Transformer.identity("DF", n.agents)})
    changed = replace(n, atoms=atoms)
    eq = equivalent(n, changed)
    assert not eq and eq.differing == ("r",)


def test_equivalence_needs_same_domain():
    with pytest.raises(ValueError):
        equivalent(gen_fdm([8]), gen_fdm([8, 9]))


def test_stats_are_counted():
    stats = EliminationStats()
    n = gen_pingpong([8])
    summarize_statespace(n, stats=stats)
    assert stats.eliminated > 0 and stats.compositions > 0 and stats.stars > 0


def test_equivalence_is_an_equivalence_on_samples():
    by_domain = {}
    for n in (n for name, n in corpus() if name.startswith(("sdan", "acyclic"))):
        by_domain.setdefault(n.domain, []).append(n)
    for same in by_domain.values():
        trio = same[:3]
        for a in trio:
            assert equivalent(a, a)
            for b in trio:
                assert bool(equivalent(a, b)) == bool(equivalent(b, a))
                for c in trio:
                    if equivalent(a, b) and equivalent(b, c):
                        assert equivalent(a, c)


SOUND_ACYCLIC = [(name, n) for name, n in corpus() if is_acyclic(n) and summarize_statespace(n).sound]


@pytest.mark.parametrize("name,n", SOUND_ACYCLIC, ids=[name for name, _ in SOUND_ACYCLIC])
def test_statespace_equals_brute_force(name, n):
    s = summarize_statespace(n)
    assert compare_summaries(s, brute_force_summary(n)).equivalent
    rng = random.Random(name)
    for _ in range(3):
        assert summarize_statespace(n, rng=rng).transformers == s.transformers
