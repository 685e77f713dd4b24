import pytest

from corpus import corpus, HAND_WRITTEN
from negotiations.analysis import is_acyclic
from negotiations.generators import gen_chain, gen_fdm, gen_fdm_unsound, gen_pingpong
from negotiations.semantics import (ExplorationBudgetExceeded, NotEnabled, OccurrenceError, UnknownOutcome, enabled,
                                    final_marking, initial_marking, is_deadlock, marking, occurrence_sequences, reach,
                                    run, step)

FDM = gen_fdm([8, 9, 10])


def test_initial_marking():
    assert initial_marking(FDM).as_dict(FDM) == {a: {"n0"} for a in "DFM"}
    single = HAND_WRITTEN["single"]()
    assert initial_marking(single).as_dict(single) == {"a": {"n0"}}
    pp = gen_pingpong([8])
    assert all(s == {"n0"} for s in initial_marking(pp).as_dict(pp).values())


def test_enabled():
    assert enabled(initial_marking(FDM), FDM) == ["n0"]
    pp = gen_pingpong([8, 9, 10])
    m = marking(pp, {"F": {"nFD", "nf"}, "D": {"nFD"}, "M": {"nDM", "nf"}})
    assert enabled(m, pp) == ["nFD"]
    assert enabled(final_marking(FDM), FDM) == []


def test_step():
    m = step(initial_marking(FDM), "n0", "st", FDM)
    assert m.as_dict(FDM) == {"F": {"nFD"}, "D": {"nFD"}, "M": {"nDM", "nf"}}
    done = run(FDM, [("n0", "st"), ("nFD", "yes"), ("nf", "r")])
    assert done == final_marking(FDM)
    with pytest.raises(NotEnabled, match="not enabled"):
        step(initial_marking(FDM), "nFD", "yes", FDM)
    with pytest.raises(UnknownOutcome):
        step(initial_marking(FDM), "n0", "nope", FDM)


def test_deadlock():
    assert not is_deadlock(final_marking(FDM), FDM)
    assert not is_deadlock(initial_marking(FDM), FDM)
    bad = gen_fdm_unsound([8, 9, 10])
    assert is_deadlock(run(bad, [("n0", "st"), ("nFD", "yes")]), bad)


def test_run():
    assert run(FDM, [("n0", "st"), ("nFD", "am"), ("nDM", "yes"), ("nf", "r")]) == final_marking(FDM)
    assert run(FDM, []) == initial_marking(FDM)
    with pytest.raises(OccurrenceError) as info:
        run(FDM, [("nFD", "yes")])
    assert info.value.index == 0


def test_reach_examples():
    g = reach(gen_chain(1))
    assert len(g.markings) == 2 and len(g.edges) == 1
    g = reach(FDM)
    assert g.final is not None
    assert not any(is_deadlock(m, FDM) for m in g.markings)
    pp = gen_pingpong([8, 9, 10])
    g = reach(pp)
    # a cycle among markings: some vertex reaches an earlier-discovered one
    assert any(e.dst <= e.src for e in g.edges)


def test_budget():
    with pytest.raises(ExplorationBudgetExceeded):
        reach(FDM, budget=3)


def test_reach_is_deterministic():
    assert reach(FDM).to_text(FDM) == reach(gen_fdm([8, 9, 10])).to_text(FDM)
    assert reach(FDM).to_dot(FDM).startswith("digraph")


@pytest.mark.parametrize("name,n", corpus(), ids=[name for name, _ in corpus()])
def test_token_invariants(name, n):
    g = reach(n)
    for m in g.markings:
        assert m.is_empty() or all(m.ready)
    if g.final is not None:
        assert not any(e.src == g.final for e in g.edges)
        assert all(e.atom == n.final or n.is_terminal(e.atom, e.outcome) for e in g.edges if e.dst == g.final)


@pytest.mark.parametrize("name,n", [c for c in corpus() if c[0].startswith(("hand", "fdm", "acyclic"))][:60])
def test_acyclic_sequences_visit_atoms_once(name, n):
    if not is_acyclic(n):
        pytest.skip("cyclic")
    for seq in occurrence_sequences(n):
        atoms = [k for k, _ in seq]
        assert len(atoms) == len(set(atoms)) <= len(n.atoms)
