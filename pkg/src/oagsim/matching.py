"""Online bipartite matching with adversarial arrival order.

Offline nodes are ``0..n_offline-1``, online nodes ``0..n_online-1``.  The
answer for an arriving online node is an offline node or :data:`NO_MATCH`.
"""
from __future__ import annotations

import math
import random
from dataclasses import dataclass
from functools import cached_property
from typing import Optional, Sequence

from .core import IllegalAnswer, InvalidParam, Objective, StepChoice

NO_MATCH = None


@dataclass(frozen=True)
class BipartiteInstance:
    n_offline: int
    n_online: int
    adjacency: tuple  # adjacency[u] = sorted tuple of offline neighbours
    arrival: tuple  # permutation of online nodes

    objective = Objective.MAXIMIZE

    def __post_init__(self):
        if len(self.adjacency) != self.n_online:
            raise InvalidParam("adjacency must list every online node")
        for u, nbrs in enumerate(self.adjacency):
            if len(set(nbrs)) != len(nbrs):
                raise InvalidParam(f"duplicate neighbour for online node {u}")
            if any(not 0 <= v < self.n_offline for v in nbrs):
                raise InvalidParam(f"neighbour index out of range for online node {u}")
        if sorted(self.arrival) != list(range(self.n_online)):
            raise InvalidParam("arrival must be a permutation of the online nodes")

    @classmethod
    def from_edges(cls, n_offline: int, n_online: int, edges, arrival=None) -> "BipartiteInstance":
        adj = [set() for _ in range(n_online)]
        for u, v in edges:
            adj[u].add(v)
        order = tuple(range(n_online)) if arrival is None else tuple(arrival)
        return cls(n_offline, n_online, tuple(tuple(sorted(s)) for s in adj), order)

    @property
    def requests(self) -> tuple:
        return self.arrival

    @property
    def edges(self) -> list[tuple[int, int]]:
        return [(u, v) for u, nbrs in enumerate(self.adjacency) for v in nbrs]

    @cached_property
    def optimal(self) -> "OptimalMatching":
        return max_matching(self)

    @cached_property
    def neighbour_sets(self) -> tuple:
        return tuple(frozenset(n) for n in self.adjacency)

    def is_answer(self, answer) -> bool:
        return answer is NO_MATCH or (type(answer) is int and 0 <= answer < self.n_offline)

    def evaluate(self, answers: Sequence) -> int:
        used = set()
        nbrs = self.neighbour_sets
        size = 0
        for u, v in zip(self.arrival, answers):
            if v is NO_MATCH:
                continue
            if v not in nbrs[u]:
                raise IllegalAnswer(f"online node {u} is not adjacent to {v}")
            if v in used:
                raise IllegalAnswer(f"offline node {v} matched twice")
            used.add(v)
            size += 1
        return size

    def remove_offline(self, v: int) -> "BipartiteInstance":
        def relabel(w):
            return w - 1 if w > v else w

        adj = tuple(tuple(relabel(w) for w in nbrs if w != v) for nbrs in self.adjacency)
        return BipartiteInstance(self.n_offline - 1, self.n_online, adj, self.arrival)

    def remove_online(self, u: int) -> "BipartiteInstance":
        adj = tuple(n for w, n in enumerate(self.adjacency) if w != u)
        arrival = tuple(w - 1 if w > u else w for w in self.arrival if w != u)
        return BipartiteInstance(self.n_offline, self.n_online - 1, adj, arrival)

    # -- plain-text format -------------------------------------------------

    def dumps(self) -> str:
        lines = [f"{self.n_offline} {self.n_online}"]
        lines += [f"{u}: " + " ".join(map(str, nbrs)) for u, nbrs in enumerate(self.adjacency)]
        lines.append("arrival: " + " ".join(map(str, self.arrival)))
        return "\n".join(lines) + "\n"

    @classmethod
    def loads(cls, text: str) -> "BipartiteInstance":
        from .formats import ParseError, parse_ints

        lines = [(i, ln.strip()) for i, ln in enumerate(text.splitlines(), 1) if ln.strip()]
        if not lines:
            raise ParseError("empty matching instance", 1)
        lineno, header = lines[0]
        head = parse_ints(header, lineno)
        if len(head) != 2:
            raise ParseError("header must be 'n_offline n_online'", lineno)
        n_off, n_on = head
        if len(lines) != n_on + 2:
            raise ParseError(f"expected {n_on} adjacency lines and an arrival line", lines[-1][0])
        adj = []
        for expect, (lineno, ln) in enumerate(lines[1:-1]):
            key, sep, rest = ln.partition(":")
            if not sep or key.strip() != str(expect):
                raise ParseError(f"expected adjacency line '{expect}: ...'", lineno)
            adj.append(tuple(sorted(parse_ints(rest, lineno))))
        lineno, last = lines[-1]
        key, sep, rest = last.partition(":")
        if not sep or key.strip() != "arrival":
            raise ParseError("final line must be 'arrival: ...'", lineno)
        try:
            return cls(n_off, n_on, tuple(adj), tuple(parse_ints(rest, lineno)))
        except InvalidParam as exc:
            raise ParseError(str(exc), lineno) from exc


@dataclass(frozen=True)
class OptimalMatching:
    pairs: tuple  # sorted (u, v) pairs
    online_partner: tuple  # m*(u) or NO_MATCH
    offline_partner: tuple  # m*(v) or NO_MATCH

    @property
    def size(self) -> int:
        return len(self.pairs)


def _augmenting_matching(instance: BipartiteInstance, order: Sequence[int], reverse_nbrs: bool = False):
    """Kuhn's augmenting-path algorithm scanning online nodes in ``order``."""
    match_v: list[Optional[int]] = [None] * instance.n_offline
    adj = instance.adjacency
    if reverse_nbrs:
        adj = tuple(tuple(reversed(n)) for n in adj)

    def augment(u, seen):
        for v in adj[u]:
            if v in seen:
                continue
            seen.add(v)
            if match_v[v] is None or augment(match_v[v], seen):
                match_v[v] = u
                return True
        return False

    for u in order:
        augment(u, set())
    return match_v


def max_matching(instance: BipartiteInstance) -> OptimalMatching:
    """Maximum-cardinality matching, lowest-index augmenting order.

    The size is certified against a second run in reversed order.
    """
    match_v = _augmenting_matching(instance, range(instance.n_online))
    check = _augmenting_matching(instance, range(instance.n_online - 1, -1, -1), reverse_nbrs=True)
    size = sum(u is not None for u in match_v)
    if size != sum(u is not None for u in check):
        raise AssertionError("augmenting-path runs disagree on the maximum matching size")
    online_partner = [NO_MATCH] * instance.n_online
    for v, u in enumerate(match_v):
        if u is not None:
            online_partner[u] = v
    pairs = tuple(sorted((u, v) for v, u in enumerate(match_v) if u is not None))
    return OptimalMatching(pairs, tuple(online_partner), tuple(match_v))


class MatchingState:
    __slots__ = ("rank", "matched_offline", "matched_online")

    def __init__(self, ranking: Sequence[int], n_online: int):
        # ranking lists offline nodes from lowest (best) to highest rank.
        rank = [0] * len(ranking)
        for r, v in enumerate(ranking):
            rank[v] = r
        self.rank = rank
        self.matched_offline = [False] * len(ranking)
        self.matched_online = [NO_MATCH] * n_online

    def pairs(self) -> list[tuple[int, int]]:
        return [(u, v) for u, v in enumerate(self.matched_online) if v is not NO_MATCH]


class Ranking:
    """Ranking: one uniform permutation of V, then lowest-rank free neighbour."""

    _NO_MATCH = StepChoice.forced(NO_MATCH)

    def start(self, problem: BipartiteInstance, rng):
        self.instance = problem
        self.adjacency = problem.adjacency
        self.state = MatchingState(rng.permutation(problem.n_offline), problem.n_online)
        self._u = None

    def choose(self, t: int, u: int) -> StepChoice:
        self._u = u
        matched = self.state.matched_offline
        free = [v for v in self.adjacency[u] if not matched[v]]
        if not free:
            return self._NO_MATCH
        return StepChoice.point(free, min(free, key=self.state.rank.__getitem__))

    def commit(self, answer):
        if answer is not NO_MATCH:
            self.state.matched_offline[answer] = True
            self.state.matched_online[self._u] = answer

    def __repr__(self):
        return "Ranking()"


def ranking_base_step(state: MatchingState, instance: BipartiteInstance, u: int) -> StepChoice:
    """StepChoice for online node ``u`` given the current matching state."""
    free = [v for v in instance.adjacency[u] if not state.matched_offline[v]]
    if not free:
        return StepChoice.forced(NO_MATCH)
    return StepChoice.point(free, min(free, key=state.rank.__getitem__))


# -- guides -------------------------------------------------------------------


class GoodGuide:
    """Suggests the M*-partner, regardless of what the algorithm has done."""

    def __init__(self, instance: BipartiteInstance, optimal: Optional[OptimalMatching] = None):
        self.instance = instance
        self.optimal = optimal or instance.optimal

    def __call__(self, t, history, valid_set):
        return self.optimal.online_partner[self.instance.arrival[t - 1]]


def good_guide_matching(m_star: OptimalMatching, u: int, valid_set=None):
    return m_star.online_partner[u]


class GreedyHarmGuide:
    """Steals the M*-partner needed by the latest-arriving future node."""

    def __init__(self, instance: BipartiteInstance, optimal: Optional[OptimalMatching] = None):
        self.instance = instance
        self.optimal = optimal or instance.optimal
        position = [0] * instance.n_online
        for i, u in enumerate(instance.arrival):
            position[u] = i
        # -1 for offline nodes nobody in M* needs
        self._need = tuple(-1 if w is None else position[w] for w in self.optimal.offline_partner)

    def __call__(self, t, history, valid_set):
        u = self.instance.arrival[t - 1]
        return bad_guide_matching_greedy_harm(self.optimal, self._need, t - 1, u, valid_set)


def bad_guide_matching_greedy_harm(optimal: OptimalMatching, need: Sequence[int], now: int, u: int, valid_set):
    """Pick the valid offline node whose M*-partner arrives latest after ``now``.

    ``need[v]`` is the arrival position of m*(v) (or -1).  Falls back to any
    other valid node (lowest index), then to m*(u).
    """
    own = optimal.online_partner[u]
    best, best_key = None, None
    for v in valid_set:
        if v is NO_MATCH or v == own:
            continue
        key = (need[v] if need[v] > now else -1, -v)
        if best_key is None or key > best_key:
            best, best_key = v, key
    if best is not None:
        return best
    return own if own in valid_set else valid_set[0]


class StaticHarmGuide:
    """Non-adaptive variant of the greedy-harm guide.

    Evaluated against all neighbours in the instance it was built on, so its
    guidance sequence is fixed in advance.
    """

    def __init__(self, instance: BipartiteInstance, optimal: Optional[OptimalMatching] = None):
        inner = GreedyHarmGuide(instance, optimal)
        self.instance = instance
        self.answers = {}
        for pos, u in enumerate(instance.arrival):
            options = instance.adjacency[u] or (NO_MATCH,)
            self.answers[pos + 1] = bad_guide_matching_greedy_harm(inner.optimal, inner._need, pos, u, options)

    def __call__(self, t, history, valid_set):
        return self.answers[t]


# -- bound ---------------------------------------------------------------------


def bound_matching(beta: float, tau: float) -> float:
    """Lower bound on the competitive ratio of Ranking-DTB."""
    if not (0 <= beta <= 1 and 0 <= tau <= 1):
        raise InvalidParam("beta and tau must lie in [0, 1]")
    beta, tau = float(beta), float(tau)
    x = 1.0 - tau
    factor = 1.0 if x == 0 else -math.expm1(-x) / x
    return max(0.5, (1.0 - beta * tau) * factor)


# -- generators ----------------------------------------------------------------


def gen_upper_triangular(n: int) -> BipartiteInstance:
    """u_i ~ v_j iff j >= i, arrival u_0..u_{n-1}."""
    if n < 1:
        raise InvalidParam("n must be >= 1")
    return BipartiteInstance(n, n, tuple(tuple(range(i, n)) for i in range(n)), tuple(range(n)))


def gen_random_perfect(n: int, extra_edge_prob: float, seed: int) -> BipartiteInstance:
    """Hidden perfect matching plus independent extra edges, shuffled arrival."""
    if n < 1:
        raise InvalidParam("n must be >= 1")
    if not 0 <= extra_edge_prob <= 1:
        raise InvalidParam("extra_edge_prob must lie in [0, 1]")
    rng = random.Random(seed)
    hidden = list(range(n))
    rng.shuffle(hidden)
    edges = [(u, hidden[u]) for u in range(n)]
    if extra_edge_prob > 0:
        edges += [(u, v) for u in range(n) for v in range(n) if v != hidden[u] and rng.random() < extra_edge_prob]
    arrival = list(range(n))
    rng.shuffle(arrival)
    return BipartiteInstance.from_edges(n, n, edges, arrival)


def is_maximal(instance: BipartiteInstance, answers: Sequence) -> bool:
    """No edge has both endpoints unmatched."""
    used = {v for v in answers if v is not NO_MATCH}
    for u, v in zip(instance.arrival, answers):
        if v is NO_MATCH and any(w not in used for w in instance.adjacency[u]):
            return False
    return True
