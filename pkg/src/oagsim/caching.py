"""Online caching (paging) with Random Mark as the base algorithm.

An answer is the page evicted at that request, or :data:`NO_EVICT`.
"""
from __future__ import annotations

import bisect
import math
import random
from collections import defaultdict
from dataclasses import dataclass, field
from fractions import Fraction
from functools import cached_property
from typing import Optional, Sequence

from .core import IllegalAnswer, InvalidParam, Objective, StepChoice, harmonic_number, is_exact

NO_EVICT = None


@dataclass(frozen=True)
class CacheTrace:
    k: int
    initial_cache: tuple
    requests: tuple

    objective = Objective.MINIMIZE

    def __post_init__(self):
        if self.k < 1:
            raise InvalidParam("cache capacity k must be >= 1")
        if len(set(self.initial_cache)) != len(self.initial_cache):
            raise InvalidParam("initial cache lists a page twice")
        if len(self.initial_cache) > self.k:
            raise InvalidParam("initial cache larger than k")
        if any(p < 0 for p in self.initial_cache) or any(p < 0 for p in self.requests):
            raise InvalidParam("page ids must be nonnegative")

    @cached_property
    def positions(self) -> dict:
        where = defaultdict(list)
        for i, page in enumerate(self.requests):
            where[page].append(i)
        return dict(where)

    def next_use(self, page: int, index: int) -> float:
        """First request index > ``index`` for ``page``; ``inf`` if none."""
        pos = self.positions.get(page)
        if pos:
            j = bisect.bisect_right(pos, index)
            if j < len(pos):
                return pos[j]
        return math.inf

    def is_answer(self, answer) -> bool:
        return answer is NO_EVICT or (type(answer) is int and answer >= 0)

    def evaluate(self, answers: Sequence) -> int:
        """Number of fetches; an answer must evict a cached page on a full-cache miss."""
        cache = set(self.initial_cache)
        k = self.k
        faults = 0
        for t, (x, a) in enumerate(zip(self.requests, answers), 1):
            if x in cache:
                if a is not NO_EVICT:
                    raise IllegalAnswer(f"step {t}: eviction of {a} on a hit")
                continue
            faults += 1
            if a is NO_EVICT:
                if len(cache) >= k:
                    raise IllegalAnswer(f"step {t}: miss on a full cache without eviction")
            elif a in cache:
                cache.remove(a)
            else:
                raise IllegalAnswer(f"step {t}: evicting {a}, which is not cached")
            cache.add(x)
        return faults

    def dumps(self) -> str:
        return "\n".join([str(self.k), " ".join(map(str, self.initial_cache)), " ".join(map(str, self.requests))]) + "\n"

    @classmethod
    def loads(cls, text: str) -> "CacheTrace":
        from .formats import ParseError, parse_ints

        lines = text.split("\n")
        if lines and lines[-1] == "":
            lines.pop()
        if len(lines) != 3:
            raise ParseError("trace file needs exactly 3 lines: k, initial cache, requests", max(len(lines), 1))
        k = parse_ints(lines[0], 1)
        if len(k) != 1:
            raise ParseError("first line must hold k", 1)
        try:
            return cls(k[0], tuple(parse_ints(lines[1], 2)), tuple(parse_ints(lines[2], 3)))
        except ParseError:
            raise
        except InvalidParam as exc:
            raise ParseError(str(exc), 2) from exc


@dataclass
class MarkingState:
    k: int
    cache: set
    marked: set = field(default_factory=set)

    def check(self, requested: Optional[int] = None):
        assert self.marked <= self.cache, "marked pages must be cached"
        assert len(self.cache) <= self.k, "cache over capacity"
        if requested is not None:
            assert requested in self.cache, "requested page not cached after its request"
            assert requested in self.marked or not self.marked, "requested page left unmarked"

    def apply(self, x: int, answer):
        if answer is not NO_EVICT:
            self.cache.discard(answer)
        self.cache.add(x)
        self.marked.add(x)
        if len(self.marked) == self.k:
            self.marked.clear()


_STAY = StepChoice.forced(NO_EVICT)


def marking_base_step(state: MarkingState, x: int) -> StepChoice:
    """Random Mark's StepChoice for request ``x``."""
    if x in state.cache or len(state.cache) < state.k:
        return _STAY
    return StepChoice.uniform(sorted(state.cache - state.marked))


class RandomMark:
    """Random Mark; evicts a uniformly random unmarked page on a full-cache miss."""

    check_invariants = False

    def start(self, problem: CacheTrace, rng):
        self.state = MarkingState(problem.k, set(problem.initial_cache))
        self._x = None

    def choose(self, t: int, x: int) -> StepChoice:
        self._x = x
        return marking_base_step(self.state, x)

    def commit(self, answer):
        self.state.apply(self._x, answer)
        if self.check_invariants:
            self.state.check(self._x)

    def __repr__(self):
        return "RandomMark()"


# -- guides -------------------------------------------------------------------


def good_guide_caching(trace: CacheTrace, time: int, valid_set) -> Optional[int]:
    """Evict the candidate requested latest (never-again counts as latest)."""
    if valid_set[0] is NO_EVICT:
        return NO_EVICT
    i = time - 1
    return max(valid_set, key=lambda p: (trace.next_use(p, i), -p))


def bad_guide_caching(trace: CacheTrace, time: int, valid_set) -> Optional[int]:
    """Evict the candidate requested soonest."""
    if valid_set[0] is NO_EVICT:
        return NO_EVICT
    i = time - 1
    return min(valid_set, key=lambda p: (trace.next_use(p, i), p))


class GoodGuide:
    def __init__(self, trace: CacheTrace):
        self.trace = trace

    def __call__(self, t, history, valid_set):
        return good_guide_caching(self.trace, t, valid_set)


class AntiBeladyGuide:
    def __init__(self, trace: CacheTrace):
        self.trace = trace

    def __call__(self, t, history, valid_set):
        return bad_guide_caching(self.trace, t, valid_set)


# -- offline optimum ------------------------------------------------------------


def belady_opt(trace: CacheTrace) -> int:
    """Farthest-in-future fetch count."""
    cache = set(trace.initial_cache)
    faults = 0
    for i, x in enumerate(trace.requests):
        if x in cache:
            continue
        faults += 1
        if len(cache) >= trace.k:
            cache.remove(max(cache, key=lambda p: (trace.next_use(p, i), -p)))
        cache.add(x)
    return faults


# -- phases ---------------------------------------------------------------------


@dataclass
class PhaseStats:
    phase_index: int
    start: int  # request index, inclusive
    stop: int  # request index, exclusive
    clean: int
    returning: int
    vanishing: int
    alg_faults: Optional[int] = None
    blame_chain_lengths: list = field(default_factory=list)


def phase_boundaries(requests: Sequence[int], k: int) -> list[tuple[int, int]]:
    """Greedy maximal split into segments with at most ``k`` distinct pages."""
    spans = []
    start, seen = 0, set()
    for i, x in enumerate(requests):
        if x not in seen and len(seen) == k:
            spans.append((start, i))
            start, seen = i, set()
        seen.add(x)
    if requests:
        spans.append((start, len(requests)))
    return spans


def phase_partition(trace: CacheTrace, answers: Optional[Sequence] = None) -> list[PhaseStats]:
    """Phases of ``trace`` with clean/returning/vanishing counts.

    Pages are classified against the cache at each phase start.  With
    ``answers`` that cache is replayed from the algorithm's evictions and
    per-phase faults and blame chains are filled in; without them, every
    phase after the first starts from the previous phase's pages.
    """
    spans = phase_boundaries(trace.requests, trace.k)
    stats = []
    cache = set(trace.initial_cache)
    for index, (lo, hi) in enumerate(spans):
        segment = trace.requests[lo:hi]
        pages = set(segment)
        returning = len(pages & cache)
        phase = PhaseStats(index, lo, hi, len(pages) - returning, returning, len(cache - pages))
        if answers is None:
            cache = pages
        else:
            faults = 0
            pending: dict = {}
            chains: list[int] = []
            for x, a in zip(segment, answers[lo:hi]):
                if x in cache:
                    continue
                faults += 1
                chain = pending.pop(x, None)
                if a is not NO_EVICT:
                    cache.discard(a)
                    if chain is None:
                        chain = len(chains)
                        chains.append(0)
                    chains[chain] += 1
                    pending[a] = chain
                cache.add(x)
            phase.alg_faults = faults
            phase.blame_chain_lengths = chains
        stats.append(phase)
    return stats


# -- bound ------------------------------------------------------------------------


def bound_caching(beta, tau, k: int):
    """min{2/(tau(1-beta)), 2H_k/(1-tau beta), k}; zero denominators give +inf."""
    if not (0 <= beta <= 1 and 0 <= tau <= 1):
        raise InvalidParam("beta and tau must lie in [0, 1]")
    if k < 1:
        raise InvalidParam("k must be >= 1")
    exact = is_exact(beta, tau)
    if not exact:
        beta, tau = float(beta), float(tau)
    h = harmonic_number(k) if exact else float(harmonic_number(k))
    trust_good = tau * (1 - beta)
    keep = 1 - tau * beta
    branches = [
        2 / trust_good if trust_good else math.inf,
        2 * h / keep if keep else math.inf,
        Fraction(k) if exact else float(k),
    ]
    return min(branches)


# -- generators ---------------------------------------------------------------------


def gen_cyclic(k: int, rounds: int, warm: bool = False) -> CacheTrace:
    """Pages 1..k+1 repeated ``rounds`` times; ``warm`` preloads pages 1..k."""
    if k < 1 or rounds < 0:
        raise InvalidParam("need k >= 1 and rounds >= 0")
    initial = tuple(range(1, k + 1)) if warm else ()
    return CacheTrace(k, initial, tuple(range(1, k + 2)) * rounds)


def gen_zipf(pages: int, length: int, exponent: float, seed: int, k: int, warm: bool = False) -> CacheTrace:
    """Independent draws of pages 1..pages with frequency proportional to rank^-exponent."""
    if pages < 1:
        raise InvalidParam("pages must be >= 1")
    if exponent < 0:
        raise InvalidParam("exponent must be >= 0")
    if length < 0:
        raise InvalidParam("length must be >= 0")
    rng = random.Random(seed)
    population = list(range(1, pages + 1))
    weights = [r ** -exponent for r in population]
    requests = tuple(rng.choices(population, weights=weights, k=length))
    initial = tuple(range(1, min(k, pages) + 1)) if warm else ()
    return CacheTrace(k, initial, requests)
