"""Request-answer games, the two-guide guidance channel and the run loops.

A problem instance exposes its request sequence, an objective and a cost
(or payoff) function over answer sequences.  Base online algorithms are
stateful per-trial objects with a three-call protocol::

    algorithm.start(problem, rng)       # reset, draw any up-front randomness
    choice = algorithm.choose(t, req)   # StepChoice: valid answers + sampler
    algorithm.commit(answer)            # irrevocably apply the answer

OAG algorithms additionally implement ``decide(choice, guidance, env, alg)``
(see :mod:`oagsim.dtb`).
"""
from __future__ import annotations

import enum
import hashlib
import random
from dataclasses import dataclass, field
from fractions import Fraction
from typing import Any, Callable, Hashable, NamedTuple, Optional, Protocol, Sequence


class OagError(Exception):
    """Base class for run-level errors."""


class LengthMismatch(OagError):
    pass


class IllegalAnswer(OagError):
    pass


class EmptyValidSet(OagError):
    pass


class GuideProtocolError(OagError):
    pass


class InvalidParam(OagError, ValueError):
    pass


class Objective(enum.Enum):
    MINIMIZE = "minimize"
    MAXIMIZE = "maximize"

    def satisfies(self, ratio: float, bound: float) -> bool:
        """Whether ``ratio`` = alg/opt is on the good side of ``bound``."""
        if self is Objective.MINIMIZE:
            return ratio <= bound
        return ratio >= bound


class Source(enum.Enum):
    GOOD = "good"
    BAD = "bad"


class GuidanceEvent(NamedTuple):
    time: int
    source: Source
    guidance: Any
    trusted: bool
    adopted: Any


class Stream:
    """Deterministic random stream with the three draw kinds the library uses."""

    __slots__ = ("_rng", "_random")

    def __init__(self, seed: int):
        self._rng = random.Random(seed)
        self._random = self._rng.random

    def seed(self, seed: int) -> None:
        self._rng.seed(seed)

    def bernoulli(self, p: float) -> bool:
        # p in {0, 1} still consumes one draw; random() < 1 always holds.
        return self._random() < p

    def choice(self, options: Sequence[Any]) -> Any:
        return options[int(self._random() * len(options))]

    def permutation(self, n: int) -> list[int]:
        perm = list(range(n))
        self._rng.shuffle(perm)
        return perm


def derive_seed(*parts: Hashable) -> int:
    """Stable 63-bit seed from a tuple of parts (independent of PYTHONHASHSEED)."""
    text = ":".join(map(repr, parts)).encode()
    return int.from_bytes(hashlib.blake2b(text, digest_size=8).digest(), "little") >> 1


def derive_seed_pair(*parts: Hashable) -> tuple[int, int]:
    """Two independent 63-bit seeds from one 16-byte digest."""
    digest = hashlib.blake2b(":".join(map(repr, parts)).encode(), digest_size=16).digest()
    return int.from_bytes(digest[:8], "little") >> 1, int.from_bytes(digest[8:], "little") >> 1


@dataclass
class RngStreams:
    """Per-trial random streams.

    ``environment`` feeds guide-source and trust coins, ``algorithm`` feeds
    base-algorithm sampling only.  ``guide`` (randomised adversaries) is
    created lazily so trials that never need it skip the seeding cost.
    """

    environment: Stream
    algorithm: Stream
    env_seed: int
    alg_seed: int
    _guide_seed: Optional[int] = field(default=None, repr=False)
    _guide: Optional[Stream] = field(default=None, repr=False)

    @classmethod
    def from_seeds(cls, env_seed: int, alg_seed: int, guide_seed: Optional[int] = None) -> "RngStreams":
        return cls(Stream(env_seed), Stream(alg_seed), env_seed, alg_seed, guide_seed)

    @classmethod
    def from_seed(cls, seed: int) -> "RngStreams":
        return cls.from_seeds(derive_seed(seed, "env"), derive_seed(seed, "alg"), derive_seed(seed, "guide"))

    def reseed(self, env_seed: int, alg_seed: int, guide_seed: Optional[int] = None) -> None:
        """Reuse the stream objects for another trial (cheaper than rebuilding)."""
        self.environment.seed(env_seed)
        self.algorithm.seed(alg_seed)
        self.env_seed, self.alg_seed = env_seed, alg_seed
        self._guide_seed = guide_seed
        self._guide = None

    @property
    def guide_seed(self) -> int:
        if self._guide_seed is None:
            self._guide_seed = derive_seed(self.env_seed, self.alg_seed, "guide")
        return self._guide_seed

    @property
    def guide(self) -> Stream:
        if self._guide is None:
            self._guide = Stream(self.guide_seed)
        return self._guide


class StepChoice:
    """Valid answers for one step plus the base algorithm's sampler over them.

    ``valid_set`` is an ordered tuple; ``sampler(rng)`` returns a member of it.
    """

    __slots__ = ("valid_set", "sampler")

    def __init__(self, valid_set: Sequence[Any], sampler: Callable[[Any], Any]):
        if not valid_set:
            raise EmptyValidSet("no legal answer at this step")
        self.valid_set = tuple(valid_set)
        self.sampler = sampler

    @classmethod
    def forced(cls, answer: Any) -> "StepChoice":
        return cls((answer,), lambda rng: answer)

    @classmethod
    def point(cls, valid_set: Sequence[Any], answer: Any) -> "StepChoice":
        """Deterministic sampler on ``answer`` with a wider valid set."""
        return cls(valid_set, lambda rng: answer)

    @classmethod
    def uniform(cls, valid_set: Sequence[Any]) -> "StepChoice":
        options = tuple(valid_set)
        return cls(options, lambda rng: rng.choice(options))

    def __repr__(self) -> str:
        return f"StepChoice({self.valid_set!r})"


@dataclass(frozen=True)
class OagConfig:
    beta: float
    tau: float

    def __post_init__(self):
        for name in ("beta", "tau"):
            value = getattr(self, name)
            if not 0 <= value <= 1:
                raise InvalidParam(f"{name}={value} outside [0, 1]")


class ProblemInstance(Protocol):
    objective: Objective

    @property
    def requests(self) -> Sequence[Any]: ...

    def evaluate(self, answers: Sequence[Any]): ...

    def is_answer(self, answer: Any) -> bool: ...


class OnlineAlgorithm(Protocol):
    def start(self, problem: Any, rng: Stream) -> None: ...

    def choose(self, t: int, request: Any) -> StepChoice: ...

    def commit(self, answer: Any) -> None: ...


Guide = Callable[[int, Sequence[Any], tuple], Any]
"""``guide(t, answer_history, valid_set) -> answer``; built per instance."""


def evaluate(problem: ProblemInstance, answers: Sequence[Any]):
    """Cost (Minimize) or payoff (Maximize) of ``answers`` on ``problem``."""
    if len(answers) != len(problem.requests):
        raise LengthMismatch(f"{len(answers)} answers for {len(problem.requests)} requests")
    return problem.evaluate(answers)


def run_online(algorithm: OnlineAlgorithm, problem: ProblemInstance, streams: RngStreams):
    """Prediction-oblivious run. Returns ``(answers, value)``."""
    alg_rng = streams.algorithm
    algorithm.start(problem, alg_rng)
    choose, commit = algorithm.choose, algorithm.commit
    answers = []
    append = answers.append
    for t, request in enumerate(problem.requests, 1):
        answer = choose(t, request).sampler(alg_rng)
        commit(answer)
        append(answer)
    return answers, evaluate(problem, answers)


def run_oag(
    oag_algorithm,
    problem: ProblemInstance,
    good_guide: Guide,
    bad_guide: Guide,
    config: OagConfig,
    streams: RngStreams,
    check_guidance: bool = True,
):
    """OAG run. Returns ``(answers, value, guidance_trace)``.

    Per step: guide-source coin, guide query (with V_t), then the OAG step
    (which draws the trust coin and any fallback sample).
    """
    env, alg_rng = streams.environment, streams.algorithm
    beta = config.beta
    oag_algorithm.start(problem, alg_rng)
    choose, decide, commit = oag_algorithm.choose, oag_algorithm.decide, oag_algorithm.commit
    is_answer = problem.is_answer
    coin = env.bernoulli
    bad_src, good_src, new = Source.BAD, Source.GOOD, tuple.__new__
    answers: list = []
    trace: list[GuidanceEvent] = []
    append, log = answers.append, trace.append
    for t, request in enumerate(problem.requests, 1):
        choice = choose(t, request)
        if coin(beta):
            source, guidance = bad_src, bad_guide(t, answers, choice.valid_set)
        else:
            source, guidance = good_src, good_guide(t, answers, choice.valid_set)
        if check_guidance and not is_answer(guidance):
            raise GuideProtocolError(f"step {t}: guidance {guidance!r} outside the answer space")
        answer, trusted = decide(choice, guidance, env, alg_rng)
        commit(answer)
        append(answer)
        log(new(GuidanceEvent, (t, source, guidance, trusted, answer)))
    return answers, evaluate(problem, answers), trace


def uniform_guide(rng: Callable[[], Stream]) -> Guide:
    """Null adversary: a uniformly random valid answer.

    ``rng`` is called for the stream at each query, so the stream can be
    created lazily or swapped between trials.
    """

    def guide(t, history, valid_set):
        return rng().choice(valid_set)

    return guide


def harmonic_number(k: int) -> Fraction:
    """Exact H_k = 1 + 1/2 + ... + 1/k."""
    return sum((Fraction(1, i) for i in range(1, k + 1)), Fraction(0))


def is_exact(*values) -> bool:
    return all(isinstance(v, (int, Fraction)) and not isinstance(v, bool) for v in values)
