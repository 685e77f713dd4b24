from dataclasses import replace

import pytest

from corpus import HAND_WRITTEN, corpus
from negotiations.analysis import check_soundness, classify
from negotiations.generators import gen_chain, gen_fdm, gen_fdm_unsound, gen_pingpong, gen_random_sdan
from negotiations.model import validate
from negotiations.reduction import (D_SHORTCUT, MERGE, RULES, SHORTCUT, USELESS_ARC, ClassificationError, RuleError,
                                    apply_d_shortcut, apply_merge, apply_rule, apply_shortcut, apply_useless_arc,
                                    find_candidates, find_d_shortcut, find_merge, find_shortcut, find_useless_arc,
                                    metrics, reduce_sdan, reduce_weakly_deterministic, replay, unconditionally_enables)
from negotiations.semantics import occurrence_sequences
from negotiations.summary import equivalent

FDM = gen_fdm([8, 9, 10])


# -- merge ------------------------------------------------------------------

def test_find_merge_examples():
    assert find_merge(HAND_WRITTEN["mergeable"]()) == [("n0", "n", "y")]
    # yes and no of both agreement atoms lead every party to nf
    assert find_merge(FDM) == [("nDM", "no", "yes"), ("nFD", "no", "yes")]
    assert all(equivalent(FDM, apply_merge(FDM, *c)) for c in find_merge(FDM))
    assert find_merge(HAND_WRITTEN["fig2_shortcut"]()) == [("n1", "x", "y")]


def test_merge_guard_fails_when_one_party_differs():
    n = HAND_WRITTEN["mergeable"]()
    assert ("n0", "m", "y") not in find_merge(n)
    with pytest.raises(RuleError):
        apply_merge(n, "n0", "m", "y")


def test_merge_unions_transformers():
    n = HAND_WRITTEN["mergeable"]()
    m = apply_merge(n, "n0", "y", "n")
    atom = m.atoms["n0"]
    assert atom.outcomes == ("merge(n,y)", "m")
    assert atom.delta["merge(n,y)"].pairs == n.transformer("n0", "y").pairs | n.transformer("n0", "n").pairs
    assert m.X("n0", "a", "merge(n,y)") == {"n1"}
    assert equivalent(n, m)


def test_merge_of_identical_transformers_is_idempotent():
    n = HAND_WRITTEN["mergeable"]()
    atoms = dict(n.atoms)
    same = n.transformer("n0", "y")
    atoms["n0"] = replace(atoms["n0"], delta={**atoms["n0"].delta, "n": same})
    m = apply_merge(replace(n, atoms=atoms), "n0", "n", "y")
    assert m.transformer("n0", "merge(n,y)") == same


def test_merge_never_touches_final_outcomes():
    n = HAND_WRITTEN["single_two_outcomes"]()
    assert find_merge(n) == []


# -- shortcut ---------------------------------------------------------------

def test_unconditionally_enables():
    n = HAND_WRITTEN["fig2_shortcut"]()
    assert unconditionally_enables(n, "n0", "st", "n1")
    assert unconditionally_enables(FDM, "n0", "st", "nFD")
    assert not unconditionally_enables(FDM, "n0", "st", "nDM")  # D goes to nFD
    assert not unconditionally_enables(FDM, "nFD", "am", "nDM")  # M is no party of nFD


def test_fig2_shortcut_removes_the_target():
    n = HAND_WRITTEN["fig2_shortcut"]()
    assert ("n0", "st", "n1") in find_shortcut(n)
    m = apply_shortcut(n, "n0", "st", "n1")
    assert "n1" not in m.atoms
    assert m.atoms["n0"].outcomes == ("via(st;x)", "via(st;y)")
    assert equivalent(n, m)
    assert not validate(m, generalized=True)


def test_shortcut_composes_lifted_transformers():
    n = HAND_WRITTEN["fig2_shortcut"]()
    m = apply_shortcut(n, "n0", "st", "n1")
    for r in ("x", "y"):
        got = m.transformer("n0", f"via(st;{r})").lift(n.domain)
        want = n.transformer("n0", "st").lift(n.domain) @ n.transformer("n1", r).lift(n.domain)
        assert got == want


def test_shortcut_side_condition():
    assert ("n0", "x", "n1") not in find_shortcut(HAND_WRITTEN["side_condition_blocked"]())
    # another outcome of the same atom enters the target through a hyperarc
    n = HAND_WRITTEN["sibling_hyperarc"]()
    assert ("n0", "go", "n2") not in find_shortcut(n)
    reduced, _ = reduce_weakly_deterministic(n)
    assert len(reduced.atoms) == 1


def test_shortcut_keeps_a_shared_target():
    n = HAND_WRITTEN["shared_target"]()
    m = apply_shortcut(n, "n0", "l", "n2")
    assert "n2" in m.atoms
    assert equivalent(n, m)


def test_deterministic_side_condition_always_holds():
    for seed in range(20):
        n = gen_random_sdan(seed, 6, 3, 2, 2)
        enabling = [(k, r, m) for k in n.atoms for r in n.atoms[k].outcomes for m in n.atoms
                    if m != k and unconditionally_enables(n, k, r, m)]
        assert set(find_shortcut(n)) == set(enabling)


def test_shortcut_into_final_keeps_final_outcome_names():
    n = gen_chain(2)
    m = apply_shortcut(n, "c0", "r", "cf")
    assert list(m.atoms) == ["c0"] and m.final == "c0"
    assert m.final_outcomes() == ("r",)


def test_shortcut_guard_violation():
    with pytest.raises(RuleError):
        apply_shortcut(FDM, "n0", "st", "nDM")


# -- useless arc ------------------------------------------------------------

def test_fig3_useless_arc():
    left = HAND_WRITTEN["fig3_left"]()
    assert ("n0", "a", "r", "n1", "nf") in find_useless_arc(left)
    m = apply_useless_arc(left, "n0", "a", "r", "n1", "nf")
    assert m.X("n0", "a", "r") == {"n1"}
    assert ("n0", "a", "r", "n1", "nf") not in find_useless_arc(m)
    assert set(occurrence_sequences(left)) == set(occurrence_sequences(m))
    assert find_useless_arc(HAND_WRITTEN["fig3_right"]()) == []


def test_no_useless_arcs_in_deterministic_negotiations():
    for seed in range(20):
        assert find_useless_arc(gen_random_sdan(seed, 6, 3, 2, 2)) == []


def test_useless_arc_only_removes_one_target():
    left = HAND_WRITTEN["fig3_left"]()
    m = apply_useless_arc(left, "n0", "a", "r", "n1", "nf")
    changed = {t for t in left.transitions if left.transitions[t] != m.transitions[t]}
    assert changed == {("n0", "a", "r")}
    assert m.atoms == left.atoms


# -- d-shortcut ---------------------------------------------------------------

def test_d_shortcut_needs_a_single_outcome_target():
    n = HAND_WRITTEN["fig2_shortcut"]()
    assert ("n0", "st", "n1") in find_shortcut(n)
    assert ("n0", "st", "n1") not in find_d_shortcut(n)
    with pytest.raises(RuleError):
        apply_d_shortcut(n, "n0", "st", "n1")
    chain = gen_chain(3)
    assert ("c0", "r", "c1") in find_d_shortcut(chain)


# -- strategies ---------------------------------------------------------------

def test_fdm_reduces_to_its_summary():
    reduced, trace = reduce_weakly_deterministic(FDM, debug=True)
    assert len(reduced.atoms) == 1
    assert equivalent(FDM, reduced)
    assert trace.count(SHORTCUT) > 0 and trace.count(USELESS_ARC) > 0


def test_unsound_fdm_gets_stuck():
    n = gen_fdm_unsound([8, 9, 10])
    reduced, _ = reduce_weakly_deterministic(n)
    assert len(reduced.atoms) > 1
    assert not check_soundness(n).sound


def test_single_atom_is_a_fixpoint():
    n = gen_chain(1)
    reduced, trace = reduce_weakly_deterministic(n)
    assert reduced == n and trace.applications == []
    reduced, trace, m = reduce_sdan(n)
    assert trace.applications == [] and m.out == 0 and m.shoc == 0


def test_strategies_check_their_class():
    with pytest.raises(ClassificationError):
        reduce_weakly_deterministic(gen_pingpong([8]))
    with pytest.raises(ClassificationError):
        reduce_sdan(FDM)


def test_chain_uses_one_d_shortcut_per_atom():
    for k in range(1, 9):
        reduced, trace, _ = reduce_sdan(gen_chain(k))
        assert len(reduced.atoms) == 1
        assert trace.count(D_SHORTCUT) == k - 1 and trace.count(MERGE) == 0


def test_random_sdan_within_bounds():
    reduced, trace, m = reduce_sdan(gen_random_sdan(3, 6, 3, 2, 2), debug=True)
    assert len(reduced.atoms) == 1
    assert trace.count(MERGE) <= m.out and trace.count(D_SHORTCUT) <= m.shoc


def test_replay_reproduces_the_result():
    n = gen_random_sdan(5, 7, 3, 2, 2)
    reduced, trace, _ = reduce_sdan(n)
    assert replay(n, trace.applications) == reduced
    reduced, trace = reduce_weakly_deterministic(FDM)
    assert replay(FDM, trace.applications) == reduced


def test_replay_rejects_a_tampered_trace():
    reduced, trace = reduce_weakly_deterministic(FDM)
    apps = list(trace.applications)
    apps[0] = replace(apps[0], fresh={"yes": "other"})
    with pytest.raises(RuleError):
        replay(FDM, apps)


# -- metrics ------------------------------------------------------------------

def shoc_by_enumeration(n):
    """shoc(n, r) from all maximal occurrence sequences."""
    from negotiations.semantics import run, successors
    best = {}
    for seq in occurrence_sequences(n):
        if any(True for _ in successors(run(n, seq), n)):
            continue
        for pair in set(seq):
            best[pair] = min(best.get(pair, len(seq)), len(seq))
    return {pair: length - 1 for pair, length in best.items()}


def test_metrics_examples():
    m = metrics(gen_chain(1))
    assert (m.out, m.shoc) == (0, 0)
    m = metrics(gen_chain(2))
    assert m.out == 1 and m.shoc_per_pair == {("c0", "r"): 1, ("cf", "r"): 1}
    assert metrics(FDM).out == 6
    with pytest.raises(ValueError):
        metrics(gen_pingpong([8]))


ACYCLIC = [(name, n) for name, n in corpus() if classify(n).acyclic][:120]


@pytest.mark.parametrize("name,n", ACYCLIC, ids=[name for name, _ in ACYCLIC])
def test_shoc_matches_enumeration(name, n):
    m = metrics(n)
    assert m.shoc_per_pair == shoc_by_enumeration(n)
    assert all(v <= len(n.atoms) - 1 for v in m.shoc_per_pair.values())
    assert m.shoc == sum(m.shoc_per_pair.values())


# -- rule correctness on intermediate negotiations ------------------------------

def intermediates():
    out = []
    for name, n in corpus()[::3]:
        c = classify(n)
        if not c.acyclic:
            continue
        if c.deterministic:
            _, trace, _ = reduce_sdan(n)
        elif c.weakly_deterministic:
            _, trace = reduce_weakly_deterministic(n)
        else:
            continue
        cur = n
        for i, app in enumerate(trace.applications[:6]):
            cur, _ = apply_rule(cur, app.rule, app.params)
            out.append((f"{name}@{i}", cur))
    return out


INTERMEDIATE = intermediates()


@pytest.mark.parametrize("name,n", INTERMEDIATE, ids=[name for name, _ in INTERMEDIATE])
def test_rules_preserve_equivalence_midway(name, n):
    for rule in RULES:
        for params in find_candidates(n, rule)[:4]:
            m, _ = apply_rule(n, rule, params)
            assert not validate(m, generalized=True)
            assert equivalent(n, m), (rule, params)

