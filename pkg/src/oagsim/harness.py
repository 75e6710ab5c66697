"""Experiment orchestration: grids, Monte-Carlo estimates, exact enumeration."""
from __future__ import annotations

import csv
import inspect
import io
import itertools
import json
import math
from concurrent.futures import ProcessPoolExecutor
from dataclasses import asdict, dataclass, field
from fractions import Fraction
from math import factorial, lcm
from typing import Any, Callable, Iterable, Iterator, Optional, Sequence

from . import caching, matching, mts
from .core import (
    InvalidParam,
    Objective,
    OagConfig,
    OagError,
    RngStreams,
    Source,
    Stream,
    derive_seed,
    derive_seed_pair,
    run_oag,
    uniform_guide,
)
from .dtb import DtbWrapped
from .formats import format_rational, load_instance

Z_99 = 2.576
SEED_SCHEME = "blake2b-128(master_seed, grid_index, trial) -> (environment, algorithm)"


class TooLarge(OagError):
    pass


class EmptySample(OagError, ValueError):
    pass


class GeneratorError(InvalidParam):
    pass


# -- problem registry -----------------------------------------------------------


@dataclass(frozen=True)
class BoundSpec:
    """Closed-form competitive bound for one instance family."""

    evaluator: Callable[[Any, Any], Any]
    objective: Objective
    additive: Any = 0  # d in  Alg <= c*Opt + d
    notes: str = ""

    def __call__(self, beta, tau):
        return self.evaluator(beta, tau)

    @property
    def direction(self) -> str:
        return "upper" if self.objective is Objective.MINIMIZE else "lower"


@dataclass(frozen=True)
class ProblemKit:
    name: str
    objective: Objective
    generators: dict
    make_algorithm: Callable[[], Any]
    make_good_guide: Callable[[Any], Any]
    # adversaries[name](instance) -> (rng_provider -> guide)
    adversaries: dict
    default_adversary: str
    opt: Callable[[Any], Any]
    bound_spec: Callable[[Any], BoundSpec]


def _static(cls):
    def prepare(instance):
        guide = cls(instance)
        return lambda rng: guide

    return prepare


def _uniform(instance):
    return uniform_guide


KITS = {
    "matching": ProblemKit(
        "matching",
        Objective.MAXIMIZE,
        {"upper_triangular": matching.gen_upper_triangular, "random_perfect": matching.gen_random_perfect},
        matching.Ranking,
        matching.GoodGuide,
        {"greedy_harm": _static(matching.GreedyHarmGuide), "uniform": _uniform},
        "greedy_harm",
        lambda inst: inst.optimal.size,
        lambda inst: BoundSpec(matching.bound_matching, Objective.MAXIMIZE, 0, "strict (d = 0)"),
    ),
    "caching": ProblemKit(
        "caching",
        Objective.MINIMIZE,
        {"cyclic": caching.gen_cyclic, "zipf": caching.gen_zipf},
        caching.RandomMark,
        caching.GoodGuide,
        {"anti_belady": _static(caching.AntiBeladyGuide), "uniform": _uniform},
        "anti_belady",
        caching.belady_opt,
        lambda inst: BoundSpec(
            lambda b, t: caching.bound_caching(b, t, inst.k), Objective.MINIMIZE, inst.k, "additive d = k"
        ),
    ),
    "mts": ProblemKit(
        "mts",
        Objective.MINIMIZE,
        {"random": mts.gen_mts_random, "elevator": mts.gen_mts_elevator},
        mts.PhaseWalk,
        mts.GoodGuide,
        {"nearest_saturation": _static(mts.NearestSaturationGuide), "uniform": _uniform},
        "nearest_saturation",
        mts.mts_offline_opt,
        lambda inst: BoundSpec(lambda b, t: mts.bound_mts(b, t, inst.n), Objective.MINIMIZE, 2, "additive d = 2"),
    ),
}


def get_kit(problem: str) -> ProblemKit:
    try:
        return KITS[problem]
    except KeyError:
        raise InvalidParam(f"unknown problem {problem!r}; choose from {sorted(KITS)}") from None


# -- configuration ----------------------------------------------------------------


@dataclass
class ExperimentConfig:
    problem: str
    generator: Optional[str] = None
    params: dict = field(default_factory=dict)
    instance_path: Optional[str] = None
    beta_grid: tuple = (0.0,)
    tau_grid: tuple = (0.0,)
    trials: int = 1
    master_seed: int = 0
    adversary: Optional[str] = None
    threads: int = 1

    def __post_init__(self):
        kit = get_kit(self.problem)
        self.beta_grid = tuple(float(b) for b in self.beta_grid)
        self.tau_grid = tuple(float(t) for t in self.tau_grid)
        if not self.beta_grid or not self.tau_grid:
            raise InvalidParam("grids must be nonempty")
        for name, grid in (("beta", self.beta_grid), ("tau", self.tau_grid)):
            if any(not 0 <= x <= 1 for x in grid):
                raise InvalidParam(f"{name} grid values must lie in [0, 1]")
            if list(grid) != sorted(grid):
                raise InvalidParam(f"{name} grid must be sorted")
        if self.trials < 1:
            raise InvalidParam("trials must be >= 1")
        if self.threads < 1:
            raise InvalidParam("threads must be >= 1")
        if self.adversary is None:
            self.adversary = kit.default_adversary
        if self.adversary not in kit.adversaries:
            raise InvalidParam(f"unknown adversary {self.adversary!r} for {self.problem}")
        if self.instance_path is None:
            if self.generator not in kit.generators:
                raise InvalidParam(f"unknown generator {self.generator!r} for {self.problem}")
            gen = kit.generators[self.generator]
            accepted = inspect.signature(gen).parameters
            unknown = set(self.params) - set(accepted)
            if unknown:
                raise InvalidParam(f"generator {self.generator} does not take {sorted(unknown)}")
            if "seed" in accepted and "seed" not in self.params:
                self.params = {**self.params, "seed": derive_seed(self.master_seed, "instance")}

    @property
    def grid(self) -> list[tuple[float, float]]:
        return [(b, t) for b in self.beta_grid for t in self.tau_grid]

    def resolved(self) -> dict:
        out = asdict(self)
        out["params"] = dict(sorted(self.params.items()))
        out["beta_grid"] = list(self.beta_grid)
        out["tau_grid"] = list(self.tau_grid)
        out["seed_scheme"] = SEED_SCHEME
        return out

    @classmethod
    def from_resolved(cls, data: dict) -> "ExperimentConfig":
        data = {k: v for k, v in data.items() if k != "seed_scheme"}
        return cls(**data)


def build_instance(config: ExperimentConfig):
    kit = get_kit(config.problem)
    if config.instance_path is not None:
        return load_instance(config.problem, config.instance_path)
    try:
        return kit.generators[config.generator](**config.params)
    except (TypeError, InvalidParam) as exc:
        raise GeneratorError(f"{config.generator}: {exc}") from exc


def trial_seeds(master_seed: int, grid_index: int, trial: int) -> tuple[int, int]:
    """(environment, algorithm) seeds for one trial."""
    return derive_seed_pair(master_seed, grid_index, trial)


def check_seed_collisions(config: ExperimentConfig) -> None:
    seen = set()
    for g in range(len(config.grid)):
        for trial in range(config.trials):
            env, _ = trial_seeds(config.master_seed, g, trial)
            if env in seen:
                raise InvalidParam(f"environment seed collision at grid {g}, trial {trial}")
            seen.add(env)


# -- trials -------------------------------------------------------------------------


@dataclass
class TrialRecord:
    problem: str
    beta: float
    tau: float
    grid_index: int
    trial: int
    alg: Any
    opt: Any
    good_steps: int
    bad_steps: int
    trusted_steps: int
    env_seed: int
    alg_seed: int
    answers: Optional[list] = None

    @property
    def ratio_exact(self) -> Optional[Fraction]:
        if not self.opt:
            return None
        return Fraction(self.alg) / Fraction(self.opt)

    @property
    def ratio(self) -> Optional[float]:
        exact = self.ratio_exact
        return None if exact is None else float(exact)


def run_point(
    kit: ProblemKit,
    instance,
    opt,
    beta: float,
    tau: float,
    adversary: str,
    grid_index: int,
    trials: Iterable[int],
    master_seed: int,
    keep_answers: bool = False,
) -> list[TrialRecord]:
    """All trials of one grid point, reusing algorithm and stream objects."""
    good = kit.make_good_guide(instance)
    streams = RngStreams.from_seeds(0, 0)
    bad = kit.adversaries[adversary](instance)(lambda: streams.guide)
    algorithm = DtbWrapped(kit.make_algorithm(), tau)
    config = OagConfig(beta, tau)
    out = []
    for trial in trials:
        env_seed, alg_seed = trial_seeds(master_seed, grid_index, trial)
        streams.reseed(env_seed, alg_seed)
        answers, value, trace = run_oag(algorithm, instance, good, bad, config, streams)
        bad_steps = sum(1 for e in trace if e.source is Source.BAD)
        out.append(
            TrialRecord(
                kit.name,
                beta,
                tau,
                grid_index,
                trial,
                value,
                opt,
                len(trace) - bad_steps,
                bad_steps,
                sum(1 for e in trace if e.trusted),
                env_seed,
                alg_seed,
                answers if keep_answers else None,
            )
        )
    return out


def _point_job(args):
    config, instance, opt, g, beta, tau = args
    kit = get_kit(config.problem)
    return run_point(kit, instance, opt, beta, tau, config.adversary, g, range(config.trials), config.master_seed)


def run_grid(config: ExperimentConfig, instance=None) -> Iterator[TrialRecord]:
    """Records for every grid point and trial, ordered by (grid, trial)."""
    kit = get_kit(config.problem)
    if instance is None:
        instance = build_instance(config)
    opt = kit.opt(instance)
    jobs = [(config, instance, opt, g, b, t) for g, (b, t) in enumerate(config.grid)]
    if config.threads > 1 and len(jobs) > 1:
        with ProcessPoolExecutor(max_workers=config.threads) as pool:
            for batch in pool.map(_point_job, jobs):
                yield from batch
    else:
        for job in jobs:
            yield from _point_job(job)


# -- statistics ----------------------------------------------------------------------


@dataclass(frozen=True)
class Estimate:
    trials: int
    mean: float
    stderr: Optional[float]
    ci_low: Optional[float]
    ci_high: Optional[float]


def estimate(ratios: Sequence[float]) -> Estimate:
    """Sample mean, standard error and 99% normal interval."""
    values = [float(r) for r in ratios]
    n = len(values)
    if n == 0:
        raise EmptySample("no ratios to estimate from")
    mean = math.fsum(values) / n
    if n == 1:
        return Estimate(1, mean, None, None, None)
    if min(values) == max(values):
        mean, se = values[0], 0.0
    else:
        var = math.fsum((x - mean) ** 2 for x in values) / (n - 1)
        se = math.sqrt(var / n)
    return Estimate(n, mean, se, mean - Z_99 * se, mean + Z_99 * se)


@dataclass(frozen=True)
class BoundCheck:
    passed: bool
    margin: float
    bound: float


def compare_to_bound(est: Estimate, bound, objective: Objective, slack: float = 0.0, sigmas: float = 3.0) -> BoundCheck:
    """3-sigma comparison of a mean ratio with a competitive bound.

    Minimize: mean <= bound + sigmas*stderr + slack, where ``slack`` is the
    additive constant divided by the optimum.  Maximize: mean >= bound -
    sigmas*stderr.
    """
    se = est.stderr or 0.0
    bound = float(bound)
    if objective is Objective.MINIMIZE:
        margin = bound + sigmas * se + slack - est.mean
    else:
        margin = est.mean - (bound - sigmas * se)
    return BoundCheck(margin >= 0, margin, bound)


@dataclass(frozen=True)
class EstimateRow:
    problem: str
    beta: float
    tau: float
    estimate: Estimate
    bound: float
    margin: float
    passed: bool


def sweep(config: ExperimentConfig, instance=None, records_sink: Optional[list] = None) -> list[EstimateRow]:
    """Run the grid and summarise each point against the problem's bound."""
    kit = get_kit(config.problem)
    if instance is None:
        instance = build_instance(config)
    opt = kit.opt(instance)
    if not opt:
        raise InvalidParam("offline optimum is 0 on this instance; ratios are undefined")
    spec = kit.bound_spec(instance)
    slack = float(Fraction(spec.additive) / Fraction(opt)) if spec.objective is Objective.MINIMIZE else 0.0
    rows = []
    for g, group in itertools.groupby(run_grid(config, instance), key=lambda r: r.grid_index):
        group = list(group)
        if records_sink is not None:
            records_sink.extend(group)
        beta, tau = config.grid[g]
        est = estimate([r.ratio for r in group])
        check = compare_to_bound(est, spec(beta, tau), spec.objective, slack)
        rows.append(EstimateRow(config.problem, beta, tau, est, check.bound, check.margin, check.passed))
    return rows


# -- exact enumeration ------------------------------------------------------------------


class _Replay:
    """Random source that replays a branch prefix and records new branch points."""

    def __init__(self, prefix: Sequence[int]):
        self.prefix = prefix
        self.path: list[tuple[int, int]] = []
        self.weight = Fraction(1)

    def _branch(self, weights: Sequence[Fraction]) -> int:
        pos = len(self.path)
        idx = self.prefix[pos] if pos < len(self.prefix) else 0
        self.path.append((idx, len(weights)))
        self.weight *= weights[idx]
        return idx

    def bernoulli(self, p) -> bool:
        p = Fraction(p)
        if p == 0:
            return False
        if p == 1:
            return True
        return self._branch((p, 1 - p)) == 0

    def choice(self, options):
        n = len(options)
        if n == 1:
            return options[0]
        return options[self._branch((Fraction(1, n),) * n)]

    def permutation(self, n: int) -> list[int]:
        remaining = list(range(n))
        out = []
        while remaining:
            out.append(remaining.pop(self._branch((Fraction(1, len(remaining)),) * len(remaining))))
        return out


class _Budget:
    def __init__(self, limit: int):
        self.limit = limit
        self.used = 0

    def spend(self, n: int = 1):
        self.used += n
        if self.used > self.limit:
            raise TooLarge(f"randomness tree exceeds the leaf budget of {self.limit}")


def enumerate_outcomes(procedure: Callable[[Any], Any], budget: Optional[_Budget] = None) -> list[tuple[Fraction, Any]]:
    """Every outcome of ``procedure(source)`` with its exact probability."""
    prefix: list[int] = []
    out = []
    while True:
        src = _Replay(prefix)
        result = procedure(src)
        if budget is not None:
            budget.spend()
        out.append((src.weight, result))
        path = list(src.path)
        while path and path[-1][0] + 1 >= path[-1][1]:
            path.pop()
        if not path:
            return out
        prefix = [idx for idx, _ in path[:-1]] + [path[-1][0] + 1]


class _SwitchStream:
    """Forwards draws to whichever source is current."""

    def __init__(self):
        self.current = None

    def __call__(self):
        return self.current


def exact_expectation(
    instance,
    make_algorithm: Callable[[], Any],
    good_guide,
    adversary: Callable[[Callable], Any],
    beta,
    tau,
    budget: int = 10**6,
) -> Fraction:
    """Exact expected value of the DTB-wrapped base algorithm.

    Enumerates the up-front randomness of the base algorithm and, step by
    step, the guide-source coin, any adversary randomness, the trust coin and
    the fallback sample.  The compiler's rule is restated here rather than
    borrowed from :func:`oagsim.dtb.dtb_step`, so this is an independent check
    of the sampling path.  ``adversary`` takes a stream provider and returns
    the bad guide.
    """
    beta, tau = Fraction(beta), Fraction(tau)
    requests = instance.requests
    m = len(requests)
    spent = _Budget(budget)
    switch = _SwitchStream()
    bad_guide = adversary(switch)
    total = Fraction(0)

    for start_weight, start_path in enumerate_outcomes(
        lambda src: (make_algorithm().start(instance, src), src.path)[1], spent
    ):
        start_prefix = [idx for idx, _ in start_path]

        def fresh(history):
            alg = make_algorithm()
            alg.start(instance, _Replay(start_prefix))
            for t, answer in enumerate(history, 1):
                alg.choose(t, requests[t - 1])
                alg.commit(answer)
            return alg

        stack = [([], start_weight)]
        while stack:
            history, weight = stack.pop()
            t = len(history) + 1
            if t > m:
                total += weight * Fraction(instance.evaluate(history))
                continue
            choice = fresh(history).choose(t, requests[t - 1])

            def step(src, choice=choice, t=t, history=history):
                switch.current = src
                bad = src.bernoulli(beta)
                guidance = (bad_guide if bad else good_guide)(t, history, choice.valid_set)
                if src.bernoulli(tau) and guidance in choice.valid_set:
                    return guidance
                return choice.sampler(src)

            dist: dict = {}
            order = []
            for p, answer in enumerate_outcomes(step, spent):
                if answer not in dist:
                    dist[answer] = Fraction(0)
                    order.append(answer)
                dist[answer] += p
            for answer in order:
                stack.append((history + [answer], weight * dist[answer]))
    return total


def exact_ranking_dtb(instance: matching.BipartiteInstance, good_by_node: dict, bad_by_node: dict, beta, tau) -> Fraction:
    """Exact expected matching size of Ranking-DTB with fixed guidance per online node.

    Uses integer arithmetic scaled by the coin denominators and memoises on
    the set of matched offline nodes, so it is fast enough for exhaustive
    sweeps over small graphs.
    """
    beta, tau = Fraction(beta), Fraction(tau)
    d = lcm(beta.denominator, tau.denominator)
    b, c = int(beta * d), int(tau * d)
    scale = d * d
    w_rank, w_good, w_bad = (d - c) * d, c * (d - b), c * b
    m = instance.n_online
    adj = instance.adjacency
    arrival = instance.arrival
    good = [good_by_node.get(u) for u in arrival]
    bad = [bad_by_node.get(u) for u in arrival]
    powers = [scale**j for j in range(m + 1)]
    total = 0
    for perm in itertools.permutations(range(instance.n_offline)):
        rank = [0] * instance.n_offline
        for r, v in enumerate(perm):
            rank[v] = r
        memo: dict = {}

        def rec(t, mask):
            # expected remaining size, numerator over scale**(m - t)
            if t == m:
                return 0
            key = (t, mask)
            if key in memo:
                return memo[key]
            free = [v for v in adj[arrival[t]] if not mask >> v & 1]
            if not free:
                value = scale * rec(t + 1, mask)
            else:
                fallback = min(free, key=rank.__getitem__)
                weights: dict = {}
                for w, g in ((w_rank, fallback), (w_good, good[t]), (w_bad, bad[t])):
                    if w:
                        v = g if g in free else fallback
                        weights[v] = weights.get(v, 0) + w
                rest = powers[m - t - 1]
                value = sum(w * (rest + rec(t + 1, mask | 1 << v)) for v, w in weights.items())
            memo[key] = value
            return value

        total += rec(0, 0)
    return Fraction(total, powers[m] * factorial(instance.n_offline))


# -- tiny oracle suite --------------------------------------------------------------------


def tiny_suite() -> list[tuple[str, Any]]:
    """Built-in instances small enough for exhaustive enumeration."""
    return [
        ("matching", matching.gen_upper_triangular(3)),
        ("caching", caching.CacheTrace(2, (1, 2), (3, 1, 2, 3, 2, 1, 3, 1))),
        (
            "mts",
            mts.UniformMTSInstance.from_costs(
                2,
                [(1, 0), (Fraction(1, 2), 1), (0, Fraction(1, 2)), (1, Fraction(1, 2)), (Fraction(1, 2), 1)],
            ),
        ),
        # n = 2 leaves the walk no choices; three states exercise the uniform fallback
        (
            "mts",
            mts.UniformMTSInstance.from_costs(
                3,
                [(1, 0, 0), (Fraction(1, 2), 1, 0), (0, Fraction(1, 2), 1), (1, 1, Fraction(1, 2)), (Fraction(1, 2), 0, 1)],
            ),
        ),
    ]


ORACLE_POINTS = tuple((b, t) for b in (Fraction(0), Fraction(1, 2), Fraction(1)) for t in (Fraction(0), Fraction(1, 2), Fraction(1)))


@dataclass
class OracleCase:
    problem: str
    adversary: str
    beta: Fraction
    tau: Fraction
    exact: Fraction
    opt: Any
    bound: Any
    bound_ok: bool
    mc_mean: Optional[Fraction] = None
    mc_stderr: Optional[float] = None
    agree: Optional[bool] = None

    @property
    def passed(self) -> bool:
        return self.bound_ok and self.agree is not False


def exact_bound_ok(kit: ProblemKit, instance, exact_value: Fraction, beta, tau) -> tuple[Any, bool]:
    """Exact ratio against the bound with only the additive-constant slack."""
    opt = Fraction(kit.opt(instance))
    spec = kit.bound_spec(instance)
    bound = spec(beta, tau)
    ratio = exact_value / opt
    if spec.objective is Objective.MAXIMIZE:
        return bound, ratio >= bound
    if bound == math.inf:
        return bound, True
    return bound, ratio <= bound + Fraction(spec.additive) / opt


def monte_carlo_values(kit: ProblemKit, instance, beta, tau, adversary: str, trials: int, master_seed: int) -> list:
    records = run_point(kit, instance, None, float(beta), float(tau), adversary, 0, range(trials), master_seed)
    return [Fraction(r.alg) for r in records]


def trust_marginal(tau: float, steps: int, seed: int) -> tuple[float, float]:
    """Empirical trust frequency of ``dtb_step`` when guidance is always valid."""
    from . import dtb

    choice = dtb.StepChoice.uniform((0, 1))
    env, alg = Stream(derive_seed(seed, "trust-env")), Stream(derive_seed(seed, "trust-alg"))
    hits = sum(dtb.dtb_step(choice, 0, tau, env, alg)[1] for _ in range(steps))
    return hits / steps, math.sqrt(tau * (1 - tau) / steps)


def oracle_check(
    trials: int = 10**5,
    budget: int = 10**6,
    master_seed: int = 0,
    points: Sequence = ORACLE_POINTS,
    problems: Optional[Sequence[str]] = None,
) -> tuple[list[OracleCase], list[tuple[float, float, float, bool]]]:
    """Exact vs Monte-Carlo and exact vs bound on the tiny suite.

    Monte-Carlo runs use each problem's default adversary; bound checks use
    every registered adversary.  Also returns trust-marginal checks as
    ``(tau, observed, sigma, ok)``.
    """
    cases = []
    for name, instance in tiny_suite():
        if problems is not None and name not in problems:
            continue
        kit = get_kit(name)
        good = kit.make_good_guide(instance)
        opt = kit.opt(instance)
        for adversary, prepare in kit.adversaries.items():
            make_bad = prepare(instance)
            for beta, tau in points:
                exact = exact_expectation(instance, kit.make_algorithm, good, make_bad, beta, tau, budget)
                bound, ok = exact_bound_ok(kit, instance, exact, beta, tau)
                case = OracleCase(name, adversary, beta, tau, exact, opt, bound, ok)
                if adversary == kit.default_adversary and trials > 0:
                    values = monte_carlo_values(kit, instance, beta, tau, adversary, trials, master_seed)
                    mean = sum(values, Fraction(0)) / len(values)
                    se = estimate([float(v) for v in values]).stderr or 0.0
                    case.mc_mean, case.mc_stderr = mean, se
                    case.agree = abs(float(mean - exact)) <= 3 * se if mean != exact else True
                cases.append(case)
    marginals = []
    if trials > 0:
        for tau in (0.25, 0.5, 0.75):
            observed, sigma = trust_marginal(tau, trials, master_seed)
            marginals.append((tau, observed, sigma, abs(observed - tau) <= 3 * sigma))
    return cases, marginals


# -- output ------------------------------------------------------------------------------

RECORD_COLUMNS = [
    "problem", "beta", "tau", "trial", "alg", "opt", "ratio", "good_steps", "bad_steps",
    "alg_exact", "opt_exact", "ratio_exact", "env_seed", "alg_seed",
]
ESTIMATE_COLUMNS = ["problem", "beta", "tau", "trials", "mean_ratio", "stderr", "ci_low", "ci_high", "bound", "margin", "pass"]


def fmt(value) -> str:
    if value is None:
        return ""
    if isinstance(value, bool):
        return "true" if value else "false"
    if isinstance(value, int):
        return str(value)
    value = float(value)
    if math.isinf(value):
        return "inf" if value > 0 else "-inf"
    return format(value, ".9g")


def _exact(value) -> str:
    return "" if value is None else format_rational(value)


def record_row(r: TrialRecord) -> list[str]:
    ratio = r.ratio_exact
    return [
        r.problem, fmt(r.beta), fmt(r.tau), str(r.trial), fmt(r.alg), fmt(r.opt), fmt(ratio),
        str(r.good_steps), str(r.bad_steps), _exact(r.alg), _exact(r.opt), _exact(ratio),
        str(r.env_seed), str(r.alg_seed),
    ]


def estimate_row(e: EstimateRow) -> list[str]:
    est = e.estimate
    return [
        e.problem, fmt(e.beta), fmt(e.tau), str(est.trials), fmt(est.mean), fmt(est.stderr),
        fmt(est.ci_low), fmt(est.ci_high), fmt(e.bound), fmt(e.margin), fmt(e.passed),
    ]


def emit_csv(rows: Iterable, path, header: Optional[dict] = None, kind: Optional[str] = None) -> None:
    """Write records or estimates as CSV; ``header`` is echoed as ``#`` comment lines."""
    rows = list(rows)
    if kind is None:
        kind = "estimates" if rows and isinstance(rows[0], EstimateRow) else "records"
    columns, convert = (ESTIMATE_COLUMNS, estimate_row) if kind == "estimates" else (RECORD_COLUMNS, record_row)
    buf = io.StringIO()
    if header is not None:
        buf.write("# config: " + json.dumps(header, sort_keys=True) + "\n")
    writer = csv.writer(buf, lineterminator="\n")
    writer.writerow(columns)
    for row in sorted(rows, key=lambda r: (getattr(r, "grid_index", 0), getattr(r, "trial", 0), r.beta, r.tau)):
        writer.writerow(convert(row))
    with open(path, "w", newline="") as fh:
        fh.write(buf.getvalue())


def read_csv(path) -> tuple[Optional[dict], list[dict]]:
    """Inverse of :func:`emit_csv`: the echoed config and the data rows."""
    header = None
    lines = []
    with open(path, newline="") as fh:
        for line in fh:
            if line.startswith("# config: "):
                header = json.loads(line[len("# config: "):])
            elif not line.startswith("#"):
                lines.append(line)
    return header, list(csv.DictReader(lines))


def emit_plot(rows: Sequence[dict], bound: Optional[Callable[[float, float], float]], path) -> None:
    """Mean ratio +/- CI per tau against the bound curve over beta (static file)."""
    import matplotlib

    matplotlib.use("Agg")
    import matplotlib.pyplot as plt

    plt.rcParams["svg.hashsalt"] = "oagsim"
    taus = sorted({float(r["tau"]) for r in rows})
    fig, ax = plt.subplots(figsize=(6, 4))
    for i, tau in enumerate(taus):
        pts = sorted((float(r["beta"]), r) for r in rows if float(r["tau"]) == tau)
        betas = [b for b, _ in pts]
        means = [float(r["mean_ratio"]) for _, r in pts]
        errs = [
            (float(r["ci_high"]) - float(r["mean_ratio"])) if r.get("ci_high") not in ("", None) else 0.0
            for _, r in pts
        ]
        color = f"C{i % 10}"
        ax.errorbar(betas, means, yerr=errs, fmt="o", color=color, capsize=3, label=f"tau={tau:g}")
        curve_b = [j / 100 for j in range(101)]
        if bound is not None:
            curve = [float(bound(b, tau)) for b in curve_b]
        else:
            curve = [float(r["bound"]) for _, r in pts]
            curve_b = betas
        finite = [(b, y) for b, y in zip(curve_b, curve) if math.isfinite(y)]
        if finite:
            ax.plot([b for b, _ in finite], [y for _, y in finite], "--", color=color, linewidth=1)
    problem = rows[0]["problem"] if rows else ""
    ax.set_xlabel("beta (bad guidance probability)")
    ax.set_ylabel("ratio alg / opt")
    ax.set_title(f"{problem}: empirical ratio vs bound")
    if taus:
        ax.legend(fontsize="small")
    fig.tight_layout()
    fig.savefig(path, format="svg", metadata={"Date": None})
    plt.close(fig)
