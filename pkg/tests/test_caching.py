import functools
import statistics

import pytest
from hypothesis import given, strategies as st

from oagsim.caching import (
    NO_EVICT,
    AntiBeladyGuide,
    CacheTrace,
    GoodGuide,
    MarkingState,
    RandomMark,
    bad_guide_caching,
    belady_opt,
    bound_caching,
    gen_cyclic,
    gen_zipf,
    good_guide_caching,
    marking_base_step,
    phase_boundaries,
    phase_partition,
)
from oagsim.core import IllegalAnswer, InvalidParam, OagConfig, RngStreams, harmonic_number, run_oag, run_online
from oagsim.dtb import DtbWrapped
from oagsim.formats import ParseError


def exhaustive_opt(trace: CacheTrace) -> int:
    """Minimum faults over every eviction sequence."""
    reqs = trace.requests

    @functools.lru_cache(maxsize=None)
    def best(i, cache):
        if i == len(reqs):
            return 0
        x = reqs[i]
        if x in cache:
            return best(i + 1, cache)
        if len(cache) < trace.k:
            return 1 + best(i + 1, cache | {x})
        return 1 + min(best(i + 1, (cache - {p}) | {x}) for p in cache)

    return best(0, frozenset(trace.initial_cache))


@st.composite
def traces(draw, max_len=12, max_pages=5):
    k = draw(st.integers(1, 4))
    pages = draw(st.integers(1, max_pages))
    initial = draw(st.sets(st.integers(1, pages), max_size=min(k, pages)))
    reqs = draw(st.lists(st.integers(1, pages), max_size=max_len))
    return CacheTrace(k, tuple(sorted(initial)), tuple(reqs))


@given(traces())
def test_belady_matches_exhaustive(trace):
    assert belady_opt(trace) == exhaustive_opt(trace)


def test_belady_examples():
    assert belady_opt(CacheTrace(2, (), (1, 2) * 5)) == 2
    cyc = gen_cyclic(2, 3)
    assert belady_opt(cyc) == exhaustive_opt(cyc) == 6
    assert belady_opt(CacheTrace(3, (), ())) == 0


def test_marking_step_cases():
    state = MarkingState(2, {1, 2}, {1})
    assert marking_base_step(state, 1).valid_set == (NO_EVICT,)
    assert marking_base_step(MarkingState(3, {1, 2}), 5).valid_set == (NO_EVICT,)
    choice = marking_base_step(MarkingState(3, {1, 2, 3}, {3}), 4)
    assert choice.valid_set == (1, 2)


def test_marking_unmarks_when_full():
    state = MarkingState(2, {1, 2})
    state.apply(1, NO_EVICT)
    assert state.marked == {1}
    state.apply(2, NO_EVICT)
    assert state.marked == set()


@given(traces(max_len=40, max_pages=7), st.integers(0, 2**32), st.floats(0, 1), st.floats(0, 1))
def test_marking_invariants_hold(trace, seed, beta, tau):
    alg = RandomMark()
    alg.check_invariants = True
    run_oag(DtbWrapped(alg, tau), trace, GoodGuide(trace), AntiBeladyGuide(trace), OagConfig(beta, tau), RngStreams.from_seed(seed))


def test_guides():
    trace = CacheTrace(2, (1, 2), (3, 1, 3, 3, 3, 3, 3, 3, 3, 3, 2))
    # at t=1: page 1 next at index 1, page 2 at index 10
    assert good_guide_caching(trace, 1, (1, 2)) == 2
    assert bad_guide_caching(trace, 1, (1, 2)) == 1
    assert good_guide_caching(trace, 1, (1,)) == 1
    never = CacheTrace(2, (5, 9), (4,))
    assert good_guide_caching(never, 1, (5, 9)) == 5
    assert bad_guide_caching(never, 1, (5, 9)) == 5
    assert good_guide_caching(never, 1, (NO_EVICT,)) is NO_EVICT


def test_phase_examples():
    assert phase_boundaries((1, 2, 3, 1), 2) == [(0, 2), (2, 4)]
    assert phase_boundaries((1, 2, 1, 2, 1), 2) == [(0, 5)]
    stats = phase_partition(CacheTrace(3, (), (1, 2, 3, 4, 1, 2, 3, 4)))
    assert [(s.start, s.stop) for s in stats] == [(0, 3), (3, 6), (6, 8)]
    assert [s.clean for s in stats] == [3, 1, 1]


@given(traces(max_len=30, max_pages=7))
def test_phase_properties(trace):
    stats = phase_partition(trace)
    for s in stats:
        distinct = len(set(trace.requests[s.start : s.stop]))
        assert distinct <= trace.k
        assert s.clean + s.returning == distinct


def test_perfect_trust_faults_equal_clean_on_cyclic():
    trace = gen_cyclic(5, 20, warm=True)
    for seed in range(10):
        answers, cost, _ = run_oag(
            DtbWrapped(RandomMark(), 1), trace, GoodGuide(trace), AntiBeladyGuide(trace), OagConfig(0, 1), RngStreams.from_seed(seed)
        )
        stats = phase_partition(trace, answers)
        assert all(s.alg_faults == s.clean for s in stats)
        assert cost == sum(s.clean for s in stats)


def test_literal_marking_can_exceed_clean_count():
    # marking phases and greedy phases drift apart once k pages get marked mid-phase
    trace = CacheTrace(2, (1, 2), (1, 2, 2, 3, 1))
    answers, _, _ = run_oag(
        DtbWrapped(RandomMark(), 1), trace, GoodGuide(trace), AntiBeladyGuide(trace), OagConfig(0, 1), RngStreams.from_seed(0)
    )
    stats = phase_partition(trace, answers)
    assert sum(s.alg_faults for s in stats) > sum(s.clean for s in stats)


def test_blame_chain_mean_within_bound():
    trace = gen_zipf(30, 2000, 0.6, seed=3, k=8, warm=True)
    beta, tau = 0.5, 0.5
    lengths = []
    for seed in range(30):
        answers, _, _ = run_oag(
            DtbWrapped(RandomMark(), tau), trace, GoodGuide(trace), AntiBeladyGuide(trace), OagConfig(beta, tau), RngStreams.from_seed(seed)
        )
        for s in phase_partition(trace, answers):
            lengths += s.blame_chain_lengths
    se = statistics.stdev(lengths) / len(lengths) ** 0.5
    assert statistics.mean(lengths) <= float(harmonic_number(8)) / (1 - beta * tau) + 3 * se


def test_opt_phase_lower_bound_aggregate():
    for seed in range(5):
        trace = gen_zipf(12, 300, 0.5, seed=seed, k=4, warm=True)
        stats = phase_partition(trace)
        assert belady_opt(trace) >= sum(s.clean for s in stats[1:]) / 2 - trace.k


def test_bound_examples():
    assert bound_caching(0, 1, 4) == 2
    assert bound_caching(1, 1, 5) == 5
    assert bound_caching(0, 0.5, 10) == 4
    assert bound_caching(0, 0, 10) == 2 * harmonic_number(10)
    assert isinstance(bound_caching(0, 0, 10), type(harmonic_number(1)))
    with pytest.raises(InvalidParam):
        bound_caching(0, 0, 0)


def test_generators():
    assert gen_cyclic(2, 2).requests == (1, 2, 3, 1, 2, 3)
    assert gen_cyclic(1, 1).requests == (1, 2)
    uniform = gen_zipf(4, 4000, 0, seed=1, k=2)
    counts = [uniform.requests.count(p) for p in range(1, 5)]
    assert all(abs(c - 1000) < 150 for c in counts)
    with pytest.raises(InvalidParam):
        gen_zipf(0, 5, 1, 0, 2)
    with pytest.raises(InvalidParam):
        gen_zipf(5, 5, -1, 0, 2)


def test_evaluate_legality():
    trace = CacheTrace(1, (1,), (1, 2))
    assert trace.evaluate([NO_EVICT, 1]) == 1
    with pytest.raises(IllegalAnswer):
        trace.evaluate([1, NO_EVICT])
    with pytest.raises(IllegalAnswer):
        trace.evaluate([NO_EVICT, NO_EVICT])


def test_pure_random_mark_cost():
    trace = CacheTrace(2, (), (1, 2, 1, 2))
    assert run_online(RandomMark(), trace, RngStreams.from_seed(3))[1] == 2


@given(traces())
def test_trace_text_round_trip(trace):
    assert CacheTrace.loads(trace.dumps()) == trace


def test_trace_parse_error():
    with pytest.raises(ParseError) as err:
        CacheTrace.loads("2\n1 2\n1 q\n")
    assert err.value.line == 3
    with pytest.raises(ParseError):
        CacheTrace.loads("2\n1 2 3\n1\n")
