"""Uniform metrical task systems.

States are ``0..n-1``; moving between distinct states costs 1.  Task ``i``
(1-based) occupies the continuous interval ``[i, i+1]`` and the answer for
it is the state that serves it.  All arithmetic is exact (``Fraction``).
"""
from __future__ import annotations

import copy
import math
import random
from dataclasses import dataclass, field
from fractions import Fraction
from functools import cached_property
from typing import Optional, Sequence

from .core import IllegalAnswer, InvalidParam, Objective, StepChoice, harmonic_number, is_exact

ONE = Fraction(1)


@dataclass(frozen=True)
class UniformMTSInstance:
    n: int
    tasks: tuple  # tuple of length-n tuples of Fraction
    start_state: int = 0

    objective = Objective.MINIMIZE

    def __post_init__(self):
        if self.n < 1:
            raise InvalidParam("n must be >= 1")
        if not 0 <= self.start_state < self.n:
            raise InvalidParam("start_state out of range")
        for i, task in enumerate(self.tasks, 1):
            if len(task) != self.n:
                raise InvalidParam(f"task {i} has {len(task)} costs, expected {self.n}")
            if any(not isinstance(c, (int, Fraction)) or c < 0 for c in task):
                raise InvalidParam(f"task {i} costs must be nonnegative rationals")

    @classmethod
    def from_costs(cls, n: int, tasks, start_state: int = 0) -> "UniformMTSInstance":
        return cls(n, tuple(tuple(Fraction(c) for c in task) for task in tasks), start_state)

    @property
    def requests(self) -> tuple:
        return self.tasks

    def is_answer(self, answer) -> bool:
        return type(answer) is int and 0 <= answer < self.n

    @cached_property
    def _scaled(self) -> tuple[int, tuple]:
        # integer costs over a common denominator; exact and much cheaper than Fraction sums
        den = math.lcm(1, *(c.denominator for task in self.tasks for c in task)) if self.tasks else 1
        return den, tuple(tuple(int(c * den) for c in task) for task in self.tasks)

    def evaluate(self, answers: Sequence[int]) -> Fraction:
        den, scaled = self._scaled
        total = 0
        prev = self.start_state
        n = self.n
        for i, (task, s) in enumerate(zip(scaled, answers), 1):
            if type(s) is not int or not 0 <= s < n:
                raise IllegalAnswer(f"step {i}: {s!r} is not a state")
            total += task[s] + (den if s != prev else 0)
            prev = s
        return Fraction(total, den)

    @cached_property
    def schedule(self) -> "SaturationSchedule":
        return SaturationSchedule(self)

    def dumps(self) -> str:
        from .formats import format_rational

        lines = [f"{self.n} {len(self.tasks)} {self.start_state}"]
        lines += [" ".join(format_rational(c) for c in task) for task in self.tasks]
        return "\n".join(lines) + "\n"

    @classmethod
    def loads(cls, text: str) -> "UniformMTSInstance":
        from .formats import ParseError, parse_ints, parse_rationals

        lines = [(i, ln) for i, ln in enumerate(text.splitlines(), 1) if ln.strip()]
        if not lines:
            raise ParseError("empty MTS instance", 1)
        head = parse_ints(lines[0][1], lines[0][0])
        if len(head) != 3:
            raise ParseError("header must be 'n m start_state'", lines[0][0])
        n, m, start = head
        if len(lines) != m + 1:
            raise ParseError(f"expected {m} task lines, found {len(lines) - 1}", lines[-1][0])
        tasks = []
        for lineno, ln in lines[1:]:
            costs = parse_rationals(ln, lineno)
            if len(costs) != n:
                raise ParseError(f"expected {n} costs", lineno)
            tasks.append(tuple(costs))
        try:
            return cls(n, tuple(tasks), start)
        except InvalidParam as exc:
            raise ParseError(str(exc), lines[0][0]) from exc


# -- saturation bookkeeping -----------------------------------------------------


@dataclass
class SaturationLedger:
    """Per-phase accumulated processing at continuous time ``time``."""

    n: int
    acc: list = field(default_factory=list)
    saturated: list = field(default_factory=list)
    phase: int = 0
    phase_start: Fraction = ONE
    time: int = 1

    def __post_init__(self):
        if not self.acc:
            self.acc = [Fraction(0)] * self.n
        if not self.saturated:
            self.saturated = [a >= 1 for a in self.acc]

    def copy(self) -> "SaturationLedger":
        return copy.deepcopy(self)


@dataclass
class StepEvents:
    step: int
    start_phase: int
    saturations: list = field(default_factory=list)  # (time, state, phase)
    phase_ends: list = field(default_factory=list)  # end times within (step, step+1]

    @property
    def end_phase(self) -> int:
        return self.start_phase + len(self.phase_ends)


def saturation_advance(ledger: SaturationLedger, task: Sequence[Fraction]) -> StepEvents:
    """Advance ``ledger`` across ``[i, i+1]`` under ``task``.

    States saturate when their phase accumulation reaches 1; the phase ends
    when the last one does, and accumulation restarts from that instant
    (possibly several times within one step).
    """
    i = ledger.time
    t, end = Fraction(i), Fraction(i + 1)
    events = StepEvents(i, ledger.phase)
    n = ledger.n
    while True:
        unsat = [s for s in range(n) if not ledger.saturated[s]]
        until = {s: (1 - ledger.acc[s]) / task[s] for s in unsat if task[s] > 0}
        if len(until) == len(unsat) and t + max(until.values()) <= end:
            for s in sorted(unsat, key=lambda s: (until[s], s)):
                events.saturations.append((t + until[s], s, ledger.phase))
            t += max(until.values())
            events.phase_ends.append(t)
            ledger.phase += 1
            ledger.phase_start = t
            ledger.acc = [Fraction(0)] * n
            ledger.saturated = [False] * n
            if t == end:
                break
            continue
        span = end - t
        newly = []
        for s in unsat:
            value = ledger.acc[s] + span * task[s]
            if value >= 1:
                ledger.acc[s] = ONE
                ledger.saturated[s] = True
                newly.append((t + until[s], s, ledger.phase))
            else:
                ledger.acc[s] = value
        events.saturations.extend(sorted(newly))
        break
    ledger.time = i + 1
    return events


def accumulation_from_scratch(tasks: Sequence[Sequence[Fraction]], phase_start: Fraction, time: int, n: int) -> list:
    """Processing of each state over ``[phase_start, time]`` capped at 1."""
    out = []
    for s in range(n):
        total = Fraction(0)
        for i, task in enumerate(tasks[: time - 1], 1):
            overlap = min(Fraction(i + 1), Fraction(time)) - max(Fraction(i), phase_start)
            if overlap > 0:
                total += overlap * task[s]
        out.append(min(total, ONE))
    return out


@dataclass(frozen=True)
class StepRow:
    step: int
    phase: int  # phase in force at the start of the step
    phase_ends: bool
    saturated: frozenset  # saturated at step+1 (in the phase in force then)
    unsaturated: tuple
    s_min: int
    pieces: tuple  # (phase, duration) covering [step, step+1]


@dataclass(frozen=True)
class PhaseSpan:
    index: int
    start: Fraction
    end: Fraction
    completed: bool
    saturation_time: tuple  # per state; None if it never saturates in this phase


class SaturationSchedule:
    """Per-step saturation facts for an instance.

    Row ``i`` depends only on tasks ``1..i``, so the online algorithm may read
    it; the per-phase saturation times look ahead and are for guides.
    """

    def __init__(self, instance: UniformMTSInstance):
        n = instance.n
        ledger = SaturationLedger(n)
        rows = []
        sat_times: list[dict] = [{}]
        starts = [ONE]
        for task in instance.tasks:
            step = ledger.time
            ev = saturation_advance(ledger, task)
            for when, s, phase in ev.saturations:
                while len(sat_times) <= phase:
                    sat_times.append({})
                sat_times[phase][s] = when
            starts.extend(ev.phase_ends)
            while len(sat_times) < len(starts):
                sat_times.append({})
            cuts = [Fraction(step)] + [e for e in ev.phase_ends if e < step + 1] + [Fraction(step + 1)]
            pieces = tuple((ev.start_phase + j, cuts[j + 1] - cuts[j]) for j in range(len(cuts) - 1))
            unsat = tuple(s for s in range(n) if not ledger.saturated[s])
            rows.append(
                StepRow(
                    step,
                    ev.start_phase,
                    bool(ev.phase_ends),
                    frozenset(s for s in range(n) if ledger.saturated[s]),
                    unsat,
                    min(range(n), key=lambda s: (task[s], s)),
                    pieces,
                )
            )
        m = len(instance.tasks)
        phases = []
        for j, start in enumerate(starts):
            completed = j + 1 < len(starts)
            end = starts[j + 1] if completed else Fraction(m + 1)
            if not completed and start == end and j > 0:
                continue  # phase boundary exactly at m+1 opens no new phase
            phases.append(PhaseSpan(j, start, end, completed, tuple(sat_times[j].get(s) for s in range(n))))
        self.instance = instance
        self.rows = tuple(rows)
        self.phases = tuple(phases)
        self.completed_phases = sum(p.completed for p in phases)
        self._stay = tuple(StepChoice.forced(s) for s in range(n))
        self._jump = tuple(StepChoice.forced(r.s_min) for r in rows)
        self._move = tuple(StepChoice.uniform(r.unsaturated) if r.unsaturated else None for r in rows)

    def step_choice(self, step: int, state: int) -> StepChoice:
        row = self.rows[step - 1]
        if row.phase_ends:
            return self._jump[step - 1]
        if state in row.saturated:
            return self._move[step - 1]
        return self._stay[state]


def mts_dtb_step(ledger: SaturationLedger, state: int, task: Sequence[Fraction]) -> StepChoice:
    """StepChoice of the phase-walk algorithm at the ledger's current step.

    The ledger itself is not modified.
    """
    probe = ledger.copy()
    ev = saturation_advance(probe, task)
    if ev.phase_ends:
        return StepChoice.forced(min(range(ledger.n), key=lambda s: (task[s], s)))
    if probe.saturated[state]:
        return StepChoice.uniform([s for s in range(ledger.n) if not probe.saturated[s]])
    return StepChoice.forced(state)


class PhaseWalk:
    """Stay until the current state saturates, then jump uniformly to an
    unsaturated one; at a phase end move to the cheapest state of the task."""

    def start(self, problem: UniformMTSInstance, rng):
        self.schedule = problem.schedule
        self.state = problem.start_state

    def choose(self, t: int, task) -> StepChoice:
        return self.schedule.step_choice(t, self.state)

    def commit(self, answer):
        self.state = answer

    def __repr__(self):
        return "PhaseWalk()"


# -- guides -------------------------------------------------------------------


def _saturation_key(schedule: SaturationSchedule, t: int):
    times = schedule.phases[schedule.rows[t - 1].phase].saturation_time

    def key(s):
        when = times[s]
        return math.inf if when is None else when

    return key


def good_guide_mts(schedule: SaturationSchedule, t: int, valid_set) -> int:
    """Valid state with the latest saturation time (never = latest)."""
    if len(valid_set) == 1:
        return valid_set[0]
    key = _saturation_key(schedule, t)
    return max(valid_set, key=lambda s: (key(s), -s))


def bad_guide_mts(schedule: SaturationSchedule, t: int, valid_set) -> int:
    """Valid state with the earliest saturation time."""
    if len(valid_set) == 1:
        return valid_set[0]
    key = _saturation_key(schedule, t)
    return min(valid_set, key=lambda s: (key(s), s))


class GoodGuide:
    def __init__(self, instance: UniformMTSInstance):
        self.schedule = instance.schedule

    def __call__(self, t, history, valid_set):
        return good_guide_mts(self.schedule, t, valid_set)


class NearestSaturationGuide:
    def __init__(self, instance: UniformMTSInstance):
        self.schedule = instance.schedule

    def __call__(self, t, history, valid_set):
        return bad_guide_mts(self.schedule, t, valid_set)


# -- offline optimum --------------------------------------------------------------


def mts_offline_opt(instance: UniformMTSInstance) -> Fraction:
    """Exact optimum by dynamic programming over (time, state)."""
    n = instance.n
    cost = [Fraction(0) if s == instance.start_state else ONE for s in range(n)]
    for task in instance.tasks:
        if n == 1:
            cost = [cost[0] + task[0]]
            continue
        order = sorted(range(n), key=cost.__getitem__)
        best, second = order[0], order[1]
        cost = [task[s] + min(cost[s], 1 + cost[second if s == best else best]) for s in range(n)]
    return min(cost)


# -- per-phase statistics ------------------------------------------------------------


@dataclass
class MtsPhaseStats:
    phase_index: int
    completed: bool
    transitions: int = 0  # moves inside the phase
    boundary_transitions: int = 0  # moves at a step where this phase ends
    visit_processing: list = field(default_factory=list)


def mts_phase_stats(instance: UniformMTSInstance, answers: Sequence[int]) -> list[MtsPhaseStats]:
    """Transitions and per-visit processing of an answer sequence, by phase.

    A visit is a maximal stay at one state within one phase; the step at which
    a phase ends starts a fresh visit.
    """
    schedule = instance.schedule
    stats = [MtsPhaseStats(p.index, p.completed) for p in schedule.phases]
    by_index = {s.phase_index: s for s in stats}
    prev = instance.start_state
    visit = None  # (phase, state)
    for row, task, s in zip(schedule.rows, instance.tasks, answers):
        if s != prev:
            target = by_index[row.phase]
            if row.phase_ends:
                target.boundary_transitions += 1
            else:
                target.transitions += 1
        if row.phase_ends:
            visit = None
        for phase, span in row.pieces:
            record = by_index.get(phase)
            if record is None:
                continue
            if visit != (phase, s):
                record.visit_processing.append(Fraction(0))
                visit = (phase, s)
            record.visit_processing[-1] += span * task[s]
        prev = s
    return stats


# -- bound ---------------------------------------------------------------------------


def bound_mts(beta, tau, n: int):
    """2 * min{1/(tau(1-beta)) + 1, (1-tau)/(1-tau beta)^2 * H_n + 1, n}."""
    if not (0 <= beta <= 1 and 0 <= tau <= 1):
        raise InvalidParam("beta and tau must lie in [0, 1]")
    if n < 1:
        raise InvalidParam("n must be >= 1")
    exact = is_exact(beta, tau)
    if not exact:
        beta, tau = float(beta), float(tau)
    h = harmonic_number(n) if exact else float(harmonic_number(n))
    trust_good = tau * (1 - beta)
    keep = 1 - tau * beta
    branches = [
        1 / trust_good + 1 if trust_good else math.inf,
        (1 - tau) / keep**2 * h + 1 if keep else math.inf,
        Fraction(n) if exact else float(n),
    ]
    return 2 * min(branches)


# -- generators ----------------------------------------------------------------------


def gen_mts_random(n: int, m: int, cost_grid_q: int, seed: int, start_state: int = 0) -> UniformMTSInstance:
    """Each cost an independent uniform multiple of 1/q in [0, 1]."""
    if n < 1 or m < 0 or cost_grid_q < 1:
        raise InvalidParam("need n >= 1, m >= 0, q >= 1")
    rng = random.Random(seed)
    q = cost_grid_q
    tasks = tuple(tuple(Fraction(rng.randint(0, q), q) for _ in range(n)) for _ in range(m))
    return UniformMTSInstance(n, tasks, start_state)


def gen_mts_elevator(n: int, rounds: int) -> UniformMTSInstance:
    """Unit tasks on states 0, 1, ..., n-1 in turn, repeated ``rounds`` times."""
    if n < 1 or rounds < 0:
        raise InvalidParam("need n >= 1 and rounds >= 0")
    unit = tuple(tuple(ONE if s == j else Fraction(0) for s in range(n)) for j in range(n))
    return UniformMTSInstance(n, unit * rounds, 0)
