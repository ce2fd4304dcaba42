"""Experiment driver: seeded Monte Carlo trial batches over the testers and
gadgets, with verdict tallies, Wilson intervals, parameter sweeps, and
machine-readable CSV/JSON output.

Trials are independent: trial t of a scenario draws its own Philox stream
from (master seed, task, scenario, t), and tallies are sums of per-trial
count vectors, so serial and parallel execution produce identical results.
"""

from __future__ import annotations

import configparser
import dataclasses
import json
import math
import time
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field
from pathlib import Path
from typing import Callable

import numpy as np
from scipy import stats as scipy_stats

from . import __version__, backend
from ._rng import trial_rng
from .audits import full_sensitivity_audit
from .closeness import augmented_closeness_test, schedule
from .dist_core import Outcome, Pmf, pmf_from_file
from .dp import PrivacyBudget
from .flattening import (
    BalanceParams,
    balance_map,
    DatasetSplit,
    draw_level1,
    flattened_l2_true,
    l2_stage_budget,
    private_l2_test,
    step1_buckets,
    step2_buckets,
)
from .hard_instances import HardFamily, advice_phat, couple_diamond, p_bullet, p_diamond
from .identity import (
    AdviceSpec,
    Branch,
    IdentityInstance,
    augmented_identity_budget,
    baseline_identity_budget,
    branch_select,
    identity_test,
)

TASKS = ("identity", "closeness", "l2check", "coupling", "sensitivity")
SCENARIOS = ("null", "far", "advice-close", "custom")

_TASK_SALT = {name: i for i, name in enumerate(TASKS, start=1)}
_SCEN_SALT = {name: i for i, name in enumerate(SCENARIOS)}

CSV_HEADER = (
    "scenario,n,eps,alpha,xi,eta,branch,s,k,ell,"
    "accept_rate,reject_rate,bot_rate,ci_lo,ci_hi,seconds,metric"
)

_WILSON_Z = 1.959963984540054


class ConfigError(ValueError):
    """Invalid experiment configuration; message names the offending field."""


class InvariantError(RuntimeError):
    """An internal consistency check failed."""


@dataclass(frozen=True)
class ExperimentConfig:
    task: str
    scenario: str = "null"
    n: int = 100
    eps: float = 0.25
    alpha: float = 0.05
    xi: float = 1.0
    eta: float = 0.3
    s: int = 100  # coupling sample size
    trials: int = 100
    master_seed: int = 0
    output_path: str = ""
    threads: int = 1
    p: str = ""
    q: str = ""
    p_hat: str = ""

    def validate(self) -> None:
        if self.task not in TASKS:
            raise ConfigError(f"task: unknown task {self.task!r}; expected one of {TASKS}")
        if self.scenario not in SCENARIOS:
            raise ConfigError(
                f"scenario: unknown scenario {self.scenario!r}; expected one of {SCENARIOS}"
            )
        if self.n < 2:
            raise ConfigError("n: domain size must be at least 2")
        if not 0 < self.eps <= 1:
            raise ConfigError("eps: must lie in (0, 1]")
        if not 0 <= self.alpha < 1:
            raise ConfigError("alpha: must lie in [0, 1)")
        if self.task == "closeness" and self.alpha == 0:
            raise ConfigError("alpha: closeness testing requires alpha > 0")
        if self.xi <= 0:
            raise ConfigError("xi: must be positive")
        if not 0 <= self.eta < 0.5:
            raise ConfigError("eta: must lie in [0, 0.5)")
        if self.s < 0:
            raise ConfigError("s: must be non-negative")
        if self.trials < 1:
            raise ConfigError("trials: must be at least 1")
        if self.master_seed < 0:
            raise ConfigError("master_seed: must be non-negative")
        if self.threads < 0:
            raise ConfigError("threads: must be non-negative (0 = auto)")


def wilson_interval(successes: int, total: int, z: float = _WILSON_Z) -> tuple[float, float]:
    """95% Wilson score interval for a binomial rate."""
    if total <= 0:
        return (0.0, 1.0)
    p = successes / total
    denom = 1.0 + z * z / total
    center = p + z * z / (2 * total)
    half = z * math.sqrt(p * (1 - p) / total + z * z / (4 * total * total))
    # Clamp against float roundoff at the boundaries.
    return (max(min((center - half) / denom, p), 0.0), min(max((center + half) / denom, p), 1.0))


@dataclass
class SummaryRow:
    scenario: str
    n: int
    eps: float
    alpha: float
    xi: float
    eta: float
    branch: str
    s: int
    k: int
    ell: int
    accept_rate: float
    reject_rate: float
    bot_rate: float
    ci_lo: float
    ci_hi: float
    seconds: float
    metric: str = ""
    trials: int = 0
    intervals: dict = field(default_factory=dict)

    def to_csv_line(self) -> str:
        def num(x) -> str:
            return f"{x:.12g}"

        return ",".join(
            [
                self.scenario,
                str(self.n),
                num(self.eps),
                num(self.alpha),
                num(self.xi),
                num(self.eta),
                self.branch,
                str(self.s),
                str(self.k),
                str(self.ell),
                num(self.accept_rate),
                num(self.reject_rate),
                num(self.bot_rate),
                num(self.ci_lo),
                num(self.ci_hi),
                f"{self.seconds:.3f}",
                self.metric,
            ]
        )


def resolve_pmf(spec: str, n: int) -> Pmf:
    """Pmf from a config spec: 'uniform', 'inline:p1,p2,...', 'file:PATH',
    or a bare path."""
    spec = spec.strip()
    if not spec or spec == "uniform":
        return Pmf.uniform(n)
    if spec.startswith("inline:"):
        values = [float(v) for v in spec[len("inline:") :].replace(",", " ").split()]
        pmf = Pmf.renormalized(np.array(values))
    else:
        path = spec[len("file:") :] if spec.startswith("file:") else spec
        pmf = pmf_from_file(path)
    if pmf.n != n:
        raise ConfigError(f"pmf: expected domain size {n}, got {pmf.n}")
    return pmf


def biased_uniform(n: int, bias: float) -> Pmf:
    """Pmf at total variation distance `bias` from uniform (paired bias)."""
    if bias == 0:
        return Pmf.uniform(n)
    return advice_phat(HardFamily(n, eta=bias))


def _far_from_uniform(n: int, eps: float, rng) -> Pmf:
    """A pmf at total variation distance strictly above eps from uniform."""
    if 2 * eps < 0.5:
        return p_bullet(HardFamily(n, eta=0.0, eps_prime=2 * eps), rng)
    if eps < 0.5:
        return p_bullet(HardFamily(n, eta=0.0, eps_prime=0.5), rng)
    return Pmf.point_mass(n, 0)


# ---------------------------------------------------------------------------
# Per-task trial logic. A context is rebuilt inside each worker from the
# config alone, so chunks are picklable and order-independent.
# ---------------------------------------------------------------------------


class _TaskContext:
    extras_len = 0

    def __init__(self, config: ExperimentConfig):
        self.config = config

    def trial(self, rng) -> tuple[int | None, np.ndarray]:
        raise NotImplementedError

    def budgets(self) -> tuple[str, int, int, int]:
        """(branch, s, k, ell) for the summary row."""
        return ("-", 0, 0, 0)

    def primary_rate(self) -> str:
        scen = self.config.scenario
        return {"null": "reject", "far": "accept", "advice-close": "bot"}.get(
            scen, "reject"
        )

    def metrics(self, tally: np.ndarray, trials: int) -> dict[str, float]:
        return {}


_VERDICT_INDEX = {Outcome.ACCEPT: 0, Outcome.REJECT: 1, Outcome.BOT: 2}


class _IdentityContext(_TaskContext):
    def __init__(self, config: ExperimentConfig):
        super().__init__(config)
        c = config
        self.q = resolve_pmf(c.q, c.n)
        if c.p_hat:
            p_hat = resolve_pmf(c.p_hat, c.n)
        elif c.eta > 0:
            p_hat = biased_uniform(c.n, c.eta)
        else:
            p_hat = self.q
        self.instance = IdentityInstance(
            self.q, AdviceSpec(p_hat, c.alpha), c.eps, PrivacyBudget(c.xi)
        )

    def trial(self, rng):
        c = self.config
        if c.scenario == "null":
            p = self.q
        elif c.scenario == "advice-close":
            p = self.instance.advice.p_hat
        elif c.scenario == "far":
            p = _far_from_uniform(c.n, c.eps, rng)
        else:
            p = resolve_pmf(c.p, c.n)
        outcome = identity_test(self.instance, p, rng)
        return _VERDICT_INDEX[outcome], np.empty(0)

    def budgets(self):
        branch = branch_select(self.instance)
        if branch is Branch.AUGMENTED:
            s = augmented_identity_budget(self.instance.gap, self.config.xi)
        else:
            s = baseline_identity_budget(self.config.n, self.config.eps, self.config.xi)
        return (branch.value, s, 0, 0)


class _ClosenessContext(_TaskContext):
    def __init__(self, config: ExperimentConfig):
        super().__init__(config)
        c = config
        self.p = resolve_pmf(c.p, c.n)
        if c.scenario == "null":
            self.q = self.p
        elif c.scenario == "far":
            bias = min(1.5 * c.eps, 0.49)
            self.q = (
                biased_uniform(c.n, bias) if bias > c.eps else Pmf.point_mass(c.n, 0)
            )
        else:
            self.q = resolve_pmf(c.q, c.n) if c.q else self.p
        if c.p_hat:
            p_hat = resolve_pmf(c.p_hat, c.n)
        elif c.scenario == "null" and c.alpha > 0:
            p_hat = biased_uniform(c.n, c.alpha)  # advice exactly alpha-close
        else:
            p_hat = self.p  # perfect advice
        self.advice = AdviceSpec(p_hat, c.alpha)
        self.sched = schedule(c.n, c.eps, c.alpha, c.xi)

    def trial(self, rng):
        c = self.config
        outcome = augmented_closeness_test(
            self.p, self.q, self.advice, c.n, c.eps, c.xi, rng
        )
        return _VERDICT_INDEX[outcome], np.empty(0)

    def budgets(self):
        sc = self.sched
        return (sc.branch.value, sc.s, sc.k, sc.ell)


class _L2CheckContext(_TaskContext):
    """Accuracy of the private flattened-norm release at the stage budgets."""

    extras_len = 1
    BALANCE_A = 2.0

    def __init__(self, config: ExperimentConfig):
        super().__init__(config)
        c = config
        self.p = resolve_pmf(c.p, c.n)
        self.p_hat = (
            biased_uniform(c.n, c.alpha)
            if (c.alpha > 0 and not c.p_hat)
            else (resolve_pmf(c.p_hat, c.n) if c.p_hat else self.p)
        )
        self.k, self.ell = l2_stage_budget(c.n, c.xi, self.BALANCE_A)
        self.level1 = step1_buckets(self.p_hat)
        self.params = BalanceParams(A=self.BALANCE_A, k=self.k, ell=self.ell)

    def trial(self, rng):
        c = self.config
        khat = int(rng.poisson(self.k))
        lhat = int(rng.poisson(self.ell))
        if lhat < 2:
            return _VERDICT_INDEX[Outcome.BOT], np.zeros(1)
        flattening = draw_level1(self.p, self.level1, khat, rng)
        estimation = draw_level1(self.p, self.level1, lhat, rng)
        split = balance_map(DatasetSplit(flattening, estimation), self.params, rng)
        bucketing = step2_buckets(split.F, self.level1)
        passed, released = private_l2_test(
            split, bucketing, self.params, c.alpha, self.k, c.n, PrivacyBudget(c.xi), rng
        )
        truth = flattened_l2_true(self.p, bucketing)
        acc_fail = float(abs(released - truth) > truth / 2.0)
        verdict = Outcome.ACCEPT if passed else Outcome.BOT
        return _VERDICT_INDEX[verdict], np.array([acc_fail])

    def budgets(self):
        return ("-", 0, self.k, self.ell)

    def primary_rate(self):
        return "extra0"  # accuracy failures

    def metrics(self, tally, trials):
        return {"acc_fail_rate": tally[3] / trials}


class _CouplingContext(_TaskContext):
    def __init__(self, config: ExperimentConfig):
        super().__init__(config)
        c = config
        self.family = HardFamily(c.n, eta=c.eta, alpha_prime=c.alpha)
        self.extras_len = 2 + 2 * c.n

    def trial(self, rng):
        c = self.config
        t_uniform, t_biased = couple_diamond(self.family, c.s, rng)
        ham = float(np.count_nonzero(t_uniform.items != t_biased.items))
        extras = np.concatenate(
            [[ham, ham * ham], t_uniform.counts, t_biased.counts]
        ).astype(np.float64)
        return None, extras

    def budgets(self):
        return ("-", self.config.s, 0, 0)

    def metrics(self, tally, trials):
        c = self.config
        mean = tally[3] / trials
        var = max(tally[4] / trials - mean * mean, 0.0)
        se = math.sqrt(var / trials)
        x_counts = tally[5 : 5 + c.n]
        y_counts = tally[5 + c.n : 5 + 2 * c.n]
        out = {"mean_ham": mean, "se_ham": se, "expected_ham": c.s * self.family.gap}
        if x_counts.sum() > 0:
            expected = Pmf.uniform(c.n).probs * x_counts.sum()
            out["gof_p_uniform"] = float(
                scipy_stats.chisquare(x_counts, expected).pvalue
            )
        if y_counts.sum() > 0:
            expected = p_diamond(self.family).probs * y_counts.sum()
            keep = expected > 0
            out["gof_p_biased"] = float(
                scipy_stats.chisquare(y_counts[keep], expected[keep]).pvalue
            )
        return out


def _build_context(config: ExperimentConfig) -> _TaskContext:
    return {
        "identity": _IdentityContext,
        "closeness": _ClosenessContext,
        "l2check": _L2CheckContext,
        "coupling": _CouplingContext,
    }[config.task](config)


def _chunk_tally(config: ExperimentConfig, start: int, stop: int) -> np.ndarray:
    ctx = _build_context(config)
    tally = np.zeros(3 + ctx.extras_len, dtype=np.float64)
    salt_task = _TASK_SALT[config.task]
    salt_scen = _SCEN_SALT[config.scenario]
    for idx in range(start, stop):
        rng = trial_rng(config.master_seed, salt_task, salt_scen, idx)
        verdict, extras = ctx.trial(rng)
        if verdict is not None:
            tally[verdict] += 1.0
        if extras.size:
            tally[3:] += extras
    return tally


def _sensitivity_row(config: ExperimentConfig, elapsed: float) -> SummaryRow:
    results = full_sensitivity_audit()
    max_excess = max((r.exhaustive - r.bound) for r in results if not r.exact)
    all_ok = all(r.ok for r in results)
    metric = ";".join(
        [f"audits={len(results)}", f"all_ok={int(all_ok)}", f"max_excess={max_excess:.6g}"]
    )
    return SummaryRow(
        scenario=config.scenario,
        n=config.n,
        eps=config.eps,
        alpha=config.alpha,
        xi=config.xi,
        eta=config.eta,
        branch="-",
        s=0,
        k=0,
        ell=0,
        accept_rate=1.0 if all_ok else 0.0,
        reject_rate=0.0 if all_ok else 1.0,
        bot_rate=0.0,
        ci_lo=0.0,
        ci_hi=0.0,
        seconds=elapsed,
        metric=metric,
        trials=len(results),
    )


def run_experiment(config: ExperimentConfig) -> list[SummaryRow]:
    """Run one configured batch; deterministic given config.master_seed."""
    config.validate()
    start_time = time.perf_counter()
    if config.task == "sensitivity":
        row = _sensitivity_row(config, 0.0)
        row.seconds = time.perf_counter() - start_time
        return [row]

    ctx = _build_context(config)
    trials = config.trials
    workers = config.threads if config.threads > 0 else None
    if config.threads == 1 or trials < 4:
        tally = _chunk_tally(config, 0, trials)
    else:
        n_workers = workers or 4
        chunk = max(1, math.ceil(trials / (4 * n_workers)))
        bounds = [(i, min(i + chunk, trials)) for i in range(0, trials, chunk)]
        with ProcessPoolExecutor(max_workers=workers) as pool:
            parts = list(
                pool.map(_chunk_tally, *zip(*[(config, a, b) for a, b in bounds]))
            )
        tally = np.sum(parts, axis=0)

    verdict_total = float(tally[:3].sum())
    has_verdicts = config.task != "coupling"
    if has_verdicts and abs(verdict_total - trials) > 1e-9:
        raise InvariantError(
            f"verdict tally {verdict_total} does not match trial count {trials}"
        )
    rates = tally[:3] / trials if has_verdicts else np.zeros(3)
    intervals = {
        name: wilson_interval(int(round(tally[i])), trials)
        for i, name in enumerate(("accept", "reject", "bot"))
    }
    extras_metrics = ctx.metrics(tally, trials)
    primary = ctx.primary_rate()
    if primary == "extra0":
        ci = wilson_interval(int(round(tally[3])), trials)
        intervals["extra0"] = ci
    else:
        ci = intervals[primary] if has_verdicts else (0.0, 0.0)
    branch, s, k, ell = ctx.budgets()
    metric = ";".join(f"{key}={value:.12g}" for key, value in extras_metrics.items())
    elapsed = time.perf_counter() - start_time
    row = SummaryRow(
        scenario=config.scenario,
        n=config.n,
        eps=config.eps,
        alpha=config.alpha,
        xi=config.xi,
        eta=config.eta,
        branch=branch,
        s=s,
        k=k,
        ell=ell,
        accept_rate=float(rates[0]),
        reject_rate=float(rates[1]),
        bot_rate=float(rates[2]),
        ci_lo=ci[0],
        ci_hi=ci[1],
        seconds=elapsed,
        metric=metric,
        trials=trials,
        intervals=intervals,
    )
    return [row]


_SWEEPABLE = {"n": int, "eps": float, "alpha": float, "xi": float, "eta": float, "s": int, "trials": int}


def sweep(base: ExperimentConfig, axis: str, values) -> list[SummaryRow]:
    """run_experiment once per value of a numeric config field, in order."""
    if axis not in _SWEEPABLE:
        raise ConfigError(f"sweep: unknown axis {axis!r}; expected one of {sorted(_SWEEPABLE)}")
    cast = _SWEEPABLE[axis]
    rows: list[SummaryRow] = []
    for value in values:
        cfg = dataclasses.replace(base, **{axis: cast(value)})
        rows.extend(run_experiment(cfg))
    return rows


def write_csv(rows: list[SummaryRow], path: str | Path) -> None:
    lines = [CSV_HEADER] + [row.to_csv_line() for row in rows]
    Path(path).write_text("\n".join(lines) + "\n")


def write_metadata(
    config: ExperimentConfig, rows: list[SummaryRow], path: str | Path
) -> None:
    """JSON sidecar with the config echo and full per-rate intervals."""
    payload = {
        "config": dataclasses.asdict(config),
        "version": __version__,
        "backend": backend.BACKEND,
        "rows": [
            {
                "scenario": r.scenario,
                "branch": r.branch,
                "trials": r.trials,
                "budgets": {"s": r.s, "k": r.k, "ell": r.ell},
                "rates": {
                    "accept": r.accept_rate,
                    "reject": r.reject_rate,
                    "bot": r.bot_rate,
                },
                "wilson_95": {k2: list(v) for k2, v in r.intervals.items()},
                "metric": r.metric,
            }
            for r in rows
        ],
    }
    Path(path).write_text(json.dumps(payload, indent=2, sort_keys=True) + "\n")


def canonical_csv_bytes(path: str | Path) -> bytes:
    """CSV content with the wall-clock column blanked, for determinism checks."""
    lines = Path(path).read_text().splitlines()
    header = lines[0].split(",")
    sec_idx = header.index("seconds")
    out = []
    for line in lines:
        parts = line.split(",")
        parts[sec_idx] = ""
        out.append(",".join(parts))
    return ("\n".join(out) + "\n").encode()


def load_config(path: str | Path, overrides: dict | None = None) -> ExperimentConfig:
    """Parse a key=value config file with an [experiment] section."""
    parser = configparser.ConfigParser()
    read = parser.read(str(path))
    if not read:
        raise ConfigError(f"config: cannot read {path}")
    if "experiment" not in parser:
        raise ConfigError("config: missing [experiment] section")
    section = dict(parser["experiment"])
    if "pmfs" in parser:
        section.update(dict(parser["pmfs"]))
    if overrides:
        section.update({k: v for k, v in overrides.items() if v is not None})
    fields = {f.name: f.type for f in dataclasses.fields(ExperimentConfig)}
    kwargs = {}
    casts: dict[str, Callable] = {
        "task": str, "scenario": str, "n": int, "eps": float, "alpha": float,
        "xi": float, "eta": float, "s": int, "trials": int, "master_seed": int,
        "output_path": str, "threads": int, "p": str, "q": str, "p_hat": str,
    }
    for key, value in section.items():
        if key not in fields:
            raise ConfigError(f"{key}: unknown config field")
        try:
            kwargs[key] = casts[key](value)
        except (TypeError, ValueError) as exc:
            raise ConfigError(f"{key}: cannot parse {value!r} ({exc})") from exc
    if "task" not in kwargs:
        raise ConfigError("task: required field is missing")
    config = ExperimentConfig(**kwargs)
    config.validate()
    return config
