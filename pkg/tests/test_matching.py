import itertools
import math

import networkx as nx
import pytest
from hypothesis import given, strategies as st

from oagsim.core import IllegalAnswer, InvalidParam, OagConfig, RngStreams, Stream, run_oag
from oagsim.dtb import DtbWrapped
from oagsim.formats import ParseError
from oagsim.matching import (
    NO_MATCH,
    BipartiteInstance,
    GoodGuide,
    GreedyHarmGuide,
    MatchingState,
    Ranking,
    StaticHarmGuide,
    bad_guide_matching_greedy_harm,
    bound_matching,
    gen_random_perfect,
    gen_upper_triangular,
    good_guide_matching,
    is_maximal,
    max_matching,
    ranking_base_step,
)


@st.composite
def instances(draw, max_side=6):
    n_off = draw(st.integers(1, max_side))
    n_on = draw(st.integers(1, max_side))
    edges = draw(st.sets(st.tuples(st.integers(0, n_on - 1), st.integers(0, n_off - 1))))
    arrival = draw(st.permutations(range(n_on)))
    return BipartiteInstance.from_edges(n_off, n_on, edges, arrival)


def test_ranking_picks_lowest_rank():
    inst = BipartiteInstance.from_edges(8, 1, [(0, 3), (0, 7)])
    ranking = list(range(8))
    ranking.remove(3)
    ranking.remove(7)
    ranking.insert(2, 7)
    ranking.insert(5, 3)
    state = MatchingState(ranking, 1)
    choice = ranking_base_step(state, inst, 0)
    assert choice.valid_set == (3, 7)
    assert all(choice.sampler(Stream(s)) == 7 for s in range(10))


def test_empty_neighbourhood_is_no_match():
    inst = BipartiteInstance.from_edges(2, 1, [])
    choice = ranking_base_step(MatchingState([0, 1], 1), inst, 0)
    assert choice.valid_set == (NO_MATCH,)


def test_good_guide():
    inst = BipartiteInstance.from_edges(3, 3, [(0, 1), (1, 0), (2, 0)])
    opt = max_matching(inst)
    assert opt.size == 2
    unmatched = [u for u in range(3) if opt.online_partner[u] is NO_MATCH]
    assert good_guide_matching(opt, unmatched[0]) is NO_MATCH
    assert good_guide_matching(opt, 0) == 1 == good_guide_matching(opt, 0, (2,))
    guide = GoodGuide(inst)
    assert guide(1, [], (0,)) == opt.online_partner[inst.arrival[0]]


def test_greedy_harm_examples():
    # u0 arrives first; u1 then u2 arrive later; M* is the identity.
    inst = BipartiteInstance.from_edges(3, 3, [(0, 0), (0, 1), (0, 2), (1, 1), (2, 2)])
    opt = max_matching(inst)
    guide = GreedyHarmGuide(inst, opt)
    assert guide(1, [], (0, 1, 2)) == 2  # partner of the later arriver u2
    assert guide(1, [], (0,)) == 0  # only m*(u) available
    assert guide(2, [2], (NO_MATCH,)) is NO_MATCH


def test_static_harm_matches_full_neighbourhood_choice():
    inst = gen_upper_triangular(4)
    static, adaptive = StaticHarmGuide(inst), GreedyHarmGuide(inst)
    for t, u in enumerate(inst.arrival, 1):
        assert static(t, [], ()) == adaptive(t, [], inst.adjacency[u])


def test_max_matching_examples():
    full = BipartiteInstance.from_edges(3, 3, itertools.product(range(3), range(3)))
    assert max_matching(full).size == 3
    assert max_matching(BipartiteInstance.from_edges(1, 1, [])).size == 0
    assert max_matching(gen_upper_triangular(5)).size == 5


@given(instances())
def test_max_matching_against_networkx(inst):
    g = nx.Graph()
    g.add_nodes_from(("u", u) for u in range(inst.n_online))
    g.add_nodes_from(("v", v) for v in range(inst.n_offline))
    g.add_edges_from((("u", u), ("v", v)) for u, v in inst.edges)
    ref = nx.bipartite.maximum_matching(g, top_nodes=[("u", u) for u in range(inst.n_online)])
    opt = max_matching(inst)
    assert opt.size == len(ref) // 2
    assert all(v in inst.adjacency[u] for u, v in opt.pairs)
    assert len({v for _, v in opt.pairs}) == opt.size


def test_bound_examples():
    assert bound_matching(0, 0) == pytest.approx(1 - math.exp(-1), abs=1e-12)
    assert bound_matching(0, 0.5) == pytest.approx((1 - math.exp(-0.5)) / 0.5, rel=1e-12)
    assert bound_matching(1, 1) == 0.5
    assert bound_matching(0, 1) == 1.0
    assert bound_matching(0.25, 1) == 0.75
    assert bound_matching(0, 1 - 1e-12) == pytest.approx(1.0, abs=1e-9)
    with pytest.raises(InvalidParam):
        bound_matching(1.5, 0)


@given(st.floats(0, 1), st.floats(0, 1))
def test_bound_range(beta, tau):
    assert 0.5 <= bound_matching(beta, tau) <= 1.0


def test_generators():
    assert gen_upper_triangular(1).edges == [(0, 0)]
    assert set(gen_upper_triangular(3).edges) == {(0, 0), (0, 1), (0, 2), (1, 1), (1, 2), (2, 2)}
    inst = gen_random_perfect(12, 0, seed=4)
    assert len(inst.edges) == 12 and max_matching(inst).size == 12
    assert gen_random_perfect(12, 0.3, 4) == gen_random_perfect(12, 0.3, 4)
    with pytest.raises(InvalidParam):
        gen_random_perfect(3, 1.5, 0)


def test_evaluate_rejects_illegal():
    inst = BipartiteInstance.from_edges(2, 2, [(0, 0), (1, 0)])
    assert inst.evaluate([0, None]) == 1
    with pytest.raises(IllegalAnswer):
        inst.evaluate([1, None])
    with pytest.raises(IllegalAnswer):
        inst.evaluate([0, 0])


def test_instance_validation():
    with pytest.raises(InvalidParam):
        BipartiteInstance(2, 1, ((5,),), (0,))
    with pytest.raises(InvalidParam):
        BipartiteInstance(2, 2, ((0,), (1,)), (0, 0))


@given(instances())
def test_text_round_trip(inst):
    assert BipartiteInstance.loads(inst.dumps()) == inst


def test_parse_error_location():
    with pytest.raises(ParseError) as err:
        BipartiteInstance.loads("2 2\n0: 0 1\n1: x\narrival: 0 1\n")
    assert err.value.line == 3


def test_removal_relabels():
    inst = BipartiteInstance.from_edges(3, 2, [(0, 0), (0, 2), (1, 2)], arrival=(1, 0))
    assert inst.remove_offline(1).adjacency == ((0, 1), (1,))
    smaller = inst.remove_online(0)
    assert smaller.adjacency == ((2,),) and smaller.arrival == (0,)


@given(instances(), st.floats(0, 1), st.floats(0, 1), st.integers(0, 2**32))
def test_dtb_output_is_maximal_matching(inst, beta, tau, seed):
    answers, size, _ = run_oag(
        DtbWrapped(Ranking(), tau), inst, GoodGuide(inst), GreedyHarmGuide(inst), OagConfig(beta, tau), RngStreams.from_seed(seed)
    )
    assert is_maximal(inst, answers)
    assert 2 * size >= max_matching(inst).size


def test_consistency_exact():
    inst = gen_random_perfect(40, 0.2, seed=8)
    for seed in range(30):
        _, size, _ = run_oag(
            DtbWrapped(Ranking(), 1), inst, GoodGuide(inst), GreedyHarmGuide(inst), OagConfig(0, 1), RngStreams.from_seed(seed)
        )
        assert size == 40


def test_greedy_harm_fallbacks():
    opt = max_matching(BipartiteInstance.from_edges(2, 2, [(0, 0), (1, 1)]))
    assert bad_guide_matching_greedy_harm(opt, (0, 1), 0, 0, (0,)) == 0
    assert bad_guide_matching_greedy_harm(opt, (0, 1), 0, 0, (NO_MATCH,)) is NO_MATCH
