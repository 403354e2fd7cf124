"""Monte Carlo runner for the two-stage detector.

Every trial owns a random stream derived from ``(seed, trial index)``, so a
trial's outcome does not depend on batching, worker count or completion
order.  Trials at different grid points share their trial seeds, which gives
common random numbers across a sweep and across error-injection modes.

The type-1-only stage is simulated in fixed-size vectorised chunks instead;
there the stream is keyed by ``(seed, chunk index)``.
"""

import csv
import dataclasses
import enum
import functools
import io
import json
import logging
from dataclasses import dataclass, field

import numpy as np
from joblib import Parallel, delayed
from statsmodels.stats.proportion import proportion_confint

from . import __version__
from .channel import ChannelConfig, db_to_linear, draw_activity, synthesize, synthesize_batch
from .preambles import build_pool
from .sic import ErrorInjection, inject_detection_error, project_out
from .theory import TheoryParams, calibrate_tau1, calibrate_tau2, error_budget
from .type1 import Verdict, classify, correlate, energy, label_statistics
from .type2 import NumericalBreakdown, build_mmv, cavi_posteriors, default_prior, select_support, sigma_s_sq

logger = logging.getLogger(__name__)

SWEEP_VARS = ("k2", "m", "p1_db", "p2_db", "l2")
STAGES = ("type1", "full")
SIC_MODES = ("detected", "genie")
TYPE1_CHUNK = 4096
FULL_BATCH = 256
CSV_COLUMNS = ("sweep_var", "value", "metric", "estimate", "ci_lo", "ci_hi", "theory", "trials")


@dataclass(frozen=True)
class ExperimentConfig:
    """One simulated curve: a base configuration and a one-variable sweep.

    ``sweep_var`` is one of ``k2``, ``m``, ``p1_db``, ``p2_db`` or ``l2``;
    power sweeps are given in dB.  ``stage="type1"`` only runs the correlator
    test (vectorised); ``stage="full"`` runs the whole pipeline per trial.
    ``sic_mode="genie"`` cancels the true type-1 set before error
    injection, ``"detected"`` cancels the detector's output.
    """

    channel: ChannelConfig
    n: int
    l2_size: int
    sweep_var: str
    sweep_values: tuple
    eps: float = 1e-2
    eps_c: float = 1e-3
    trials: int = 1000
    seed: int = 0
    error_injection: ErrorInjection = ErrorInjection.NONE
    cavi_runs: int = 5
    stage: str = "full"
    sic_mode: str = "detected"
    i2_source: str = "k2"
    lambda2: float = None
    k_collision: int = 2
    name: str = ""

    def __post_init__(self):
        object.__setattr__(self, "error_injection", ErrorInjection(self.error_injection))
        object.__setattr__(self, "sweep_values", tuple(self.sweep_values))
        if self.sweep_var not in SWEEP_VARS:
            raise ValueError(f"sweep_var must be one of {SWEEP_VARS}, got {self.sweep_var!r}")
        if not self.sweep_values:
            raise ValueError("sweep grid is empty")
        if self.trials < 1:
            raise ValueError("trials must be >= 1")
        if self.stage not in STAGES:
            raise ValueError(f"stage must be one of {STAGES}")
        if self.sic_mode not in SIC_MODES:
            raise ValueError(f"sic_mode must be one of {SIC_MODES}")
        if self.i2_source not in ("k2", "lambda2"):
            raise ValueError("i2_source must be 'k2' or 'lambda2'")
        if self.i2_source == "lambda2" and self.lambda2 is None:
            raise ValueError("i2_source='lambda2' needs lambda2")
        # validate every grid point eagerly
        for v in self.sweep_values:
            self.at(v)

    def at(self, value):
        """Configuration pinned to one grid point (sweep collapsed to ``value``)."""
        ch = self.channel
        l2 = self.l2_size
        var = self.sweep_var
        if var == "k2":
            ch = dataclasses.replace(ch, k2=int(value))
        elif var == "m":
            ch = dataclasses.replace(ch, m=int(value))
        elif var == "p1_db":
            ch = dataclasses.replace(ch, p1=float(db_to_linear(value)))
        elif var == "p2_db":
            ch = dataclasses.replace(ch, p2=float(db_to_linear(value)))
        elif var == "l2":
            l2 = int(value)
        if not 1 <= l2 <= self.n * (self.n - 1):
            raise ValueError(f"l2_size={l2} out of range for n={self.n}")
        if ch.k1 > self.n or ch.k2 > l2:
            raise ValueError(f"(k1, k2)=({ch.k1}, {ch.k2}) exceed pool sizes ({self.n}, {l2})")
        return _PointConfig(self, ch, l2, value)

    def to_dict(self):
        d = dataclasses.asdict(self)
        d["error_injection"] = self.error_injection.value
        d["sweep_values"] = list(self.sweep_values)
        return d


@dataclass(frozen=True)
class _PointConfig:
    base: ExperimentConfig
    channel: ChannelConfig
    l2_size: int
    value: object

    def __getattr__(self, name):
        if name.startswith("__") or name == "base":
            raise AttributeError(name)
        return getattr(self.base, name)

    @property
    def traffic(self):
        """Mean type-2 load assumed by the receiver."""
        return self.base.lambda2 if self.base.lambda2 is not None else float(self.channel.k2)

    def thresholds(self):
        ch = self.channel
        load = self.channel.k2 if self.base.i2_source == "k2" else self.base.lambda2
        i2 = load * ch.p2 / self.base.n + ch.n0
        return _thresholds(ch.m, self.base.eps, self.base.eps_c, ch.p1, i2)

    def theory(self):
        ch = self.channel
        tau1, tau2 = self.thresholds()
        if ch.n0 <= 0:
            return None
        params = TheoryParams(m=ch.m, p1=ch.p1, p2=ch.p2, n0=ch.n0, k2=ch.k2, k1l=self.base.k_collision)
        return error_budget(tau1, tau2, params, self.base.n)


@functools.lru_cache(maxsize=256)
def _thresholds(m, eps, eps_c, p1, i2):
    return calibrate_tau1(m, eps, p1, i2), calibrate_tau2(m, eps_c, p1, i2)


@dataclass
class TrialOutcome:
    """Error counts of one trial, with the number of preambles at risk."""

    index: int
    t1_md: int = 0
    t1_c_md: int = 0
    t1_active: int = 0
    t1_fa: int = 0
    t1_idle: int = 0
    t2_md: int = 0
    t2_active: int = 0
    failure: str = None
    detected1: tuple = ()
    detected2: tuple = ()


COUNT_FIELDS = ("t1_md", "t1_c_md", "t1_active", "t1_fa", "t1_idle", "t2_md", "t2_active")


def trial_seed(seed, index):
    return np.random.SeedSequence(entropy=int(seed), spawn_key=(int(index),))


@dataclass
class _Prepared:
    outcome: TrialOutcome
    truth2: tuple
    phi: np.ndarray = None
    z: np.ndarray = None


def _prepare(point, pool, index):
    """Run one trial up to the MMV problem."""
    ch = point.channel
    ss = trial_seed(point.base.seed, index)
    rng_channel, rng_inject = (np.random.default_rng(s) for s in ss.spawn(2))
    out = TrialOutcome(index=index)

    activity = draw_activity(pool, ch, rng_channel)
    signal = synthesize(pool, activity, ch, rng_channel)
    tau1, tau2 = point.thresholds()
    decision = classify(correlate(signal, pool), tau1, tau2)
    verdicts = decision.verdicts
    active = np.zeros(pool.l1_size, dtype=bool)
    active[activity.type1_choices] = True
    out.t1_active = int(active.sum())
    out.t1_idle = pool.l1_size - out.t1_active
    out.t1_md = int(np.sum(active & (verdicts == Verdict.IDLE)))
    out.t1_c_md = int(np.sum(active & (verdicts == Verdict.COLLISION)))
    out.t1_fa = int(np.sum(~active & (verdicts != Verdict.IDLE)))
    out.detected1 = tuple(decision.detected_set)
    truth2 = tuple(int(i) for i in activity.type2_choices)

    if point.stage == "type1" or ch.k2 == 0:
        return _Prepared(out, truth2)

    base_set = sorted(int(i) for i in activity.type1_choices) if point.sic_mode == "genie" else decision.detected_set
    detected = inject_detection_error(base_set, point.error_injection, activity, rng_inject, pool.l1_size)
    report = project_out(signal, detected, pool)
    problem = build_mmv(report, pool, detected, sigma_s_sq(point.traffic, pool.l2_size), ch.p2, ch.n0)
    return _Prepared(out, truth2, problem.phi, problem.z)


def run_trials(point, pool, indices):
    """Run a batch of trials at one grid point; CAVI is batched across them."""
    prepared = []
    for i in indices:
        try:
            prepared.append(_prepare(point, pool, i))
        except (ValueError, NumericalBreakdown) as exc:
            prepared.append(_Prepared(TrialOutcome(index=i, failure=f"{type(exc).__name__}: {exc}"), ()))

    pending = [p for p in prepared if p.phi is not None]
    groups = {}
    for p in pending:
        groups.setdefault(p.phi.shape, []).append(p)
    ch = point.channel
    if pending:
        alpha = ch.p2 * sigma_s_sq(point.traffic, pool.l2_size)
        prior = default_prior(point.traffic, pool.l2_size)
    for group in groups.values():
        phi = np.stack([p.phi for p in group])
        z = np.stack([p.z for p in group])
        try:
            state = cavi_posteriors(phi, z, alpha, ch.n0, prior, n_runs=point.cavi_runs)
        except NumericalBreakdown as exc:
            for p in group:
                p.outcome.failure = f"NumericalBreakdown: {exc}"
            continue
        for p, lo in zip(group, state.log_odds):
            found = select_support(lo, ch.k2)
            p.outcome.detected2 = tuple(found)
            p.outcome.t2_active = len(p.truth2)
            p.outcome.t2_md = len(set(p.truth2) - set(found))
    return [p.outcome for p in prepared]


def run_trial(config, pool, trial_index):
    """Run a single trial of a grid-point configuration (see ``ExperimentConfig.at``)."""
    point = config if isinstance(config, _PointConfig) else config.at(config.sweep_values[0])
    return run_trials(point, pool, [trial_index])[0]


def _type1_chunk(point, pool, chunk_index, size):
    ch = point.channel
    rng = np.random.default_rng(np.random.SeedSequence(entropy=int(point.base.seed), spawn_key=(1, int(chunk_index))))
    y, ch1, _ = synthesize_batch(pool, ch, rng, size)
    labels = label_statistics(energy(correlate(y, pool)), *point.thresholds())
    active = np.zeros(labels.shape, dtype=bool)
    np.put_along_axis(active, ch1, True, axis=1)
    counts = dict.fromkeys(COUNT_FIELDS, 0)
    counts["t1_active"] = int(active.sum())
    counts["t1_idle"] = int((~active).sum())
    counts["t1_md"] = int(np.sum(active & (labels == Verdict.IDLE)))
    counts["t1_c_md"] = int(np.sum(active & (labels == Verdict.COLLISION)))
    counts["t1_fa"] = int(np.sum(~active & (labels != Verdict.IDLE)))
    return chunk_index, counts


def wilson_interval(events, total, alpha=0.05):
    if total == 0:
        return (float("nan"), float("nan"))
    lo, hi = proportion_confint(events, total, alpha=alpha, method="wilson")
    return (float(lo), float(hi))


@dataclass
class GridPointStats:
    value: object
    counts: dict
    trials: int
    failures: int = 0
    failure_reasons: dict = field(default_factory=dict)
    theory: object = None

    def rate(self, events, total):
        n = self.counts[total]
        return self.counts[events] / n if n else float("nan")

    @property
    def type1_md_rate(self):
        return self.rate("t1_md", "t1_active")

    @property
    def type1_fa_rate(self):
        return self.rate("t1_fa", "t1_idle")

    @property
    def type1_c_md_rate(self):
        return self.rate("t1_c_md", "t1_active")

    @property
    def type2_md_rate(self):
        return self.rate("t2_md", "t2_active")

    @property
    def type1_theory_md(self):
        return self.theory.p_md if self.theory else float("nan")

    @property
    def type1_theory_fa(self):
        return self.theory.p_fa if self.theory else float("nan")

    def interval(self, events, total):
        return wilson_interval(self.counts[events], self.counts[total])

    def metrics(self):
        """Yield ``(metric, estimate, (lo, hi), theory, at_risk)`` tuples."""
        th = self.theory
        table = [
            ("type1_md", "t1_md", "t1_active", th.p_md if th else None),
            ("type1_c_md", "t1_c_md", "t1_active", th.p_c_md if th else None),
            ("type1_fa", "t1_fa", "t1_idle", th.p_fa if th else None),
            ("type2_md", "t2_md", "t2_active", None),
        ]
        for metric, ev, tot, theory in table:
            if self.counts[tot] == 0:
                continue
            yield metric, self.rate(ev, tot), self.interval(ev, tot), theory, self.counts[tot]


@dataclass
class ErrorStats:
    config: ExperimentConfig
    points: list

    def __getitem__(self, i):
        return self.points[i]

    def values(self):
        return [p.value for p in self.points]

    def rows(self):
        label = self.config.name
        for p in self.points:
            for metric, est, (lo, hi), theory, _ in p.metrics():
                yield {
                    "sweep_var": self.config.sweep_var,
                    "value": p.value,
                    "metric": f"{metric}:{label}" if label else metric,
                    "estimate": est,
                    "ci_lo": lo,
                    "ci_hi": hi,
                    "theory": "" if theory is None else theory,
                    "trials": p.trials,
                }


def _fmt(x):
    if isinstance(x, float):
        return repr(x)
    return str(x)


def write_csv(stats_list, fh):
    """Write one or more ``ErrorStats`` to an open text stream."""
    writer = csv.writer(fh, lineterminator="\n")
    writer.writerow(CSV_COLUMNS)
    for stats in stats_list:
        for row in stats.rows():
            writer.writerow([_fmt(row[c]) for c in CSV_COLUMNS])


def csv_text(stats_list):
    buf = io.StringIO()
    write_csv(stats_list, buf)
    return buf.getvalue()


def manifest(configs, **extra):
    """Run manifest: package version and full configurations."""

    def default(o):
        if isinstance(o, enum.Enum):
            return o.value
        if isinstance(o, np.generic):
            return o.item()
        raise TypeError(repr(o))

    payload = {"package": "ralp", "version": __version__, "experiments": [c.to_dict() for c in configs]}
    payload.update(extra)
    return json.dumps(payload, indent=2, sort_keys=True, default=default)


def _sum_counts(records):
    total = dict.fromkeys(COUNT_FIELDS, 0)
    for r in records:
        for k in COUNT_FIELDS:
            total[k] += r[k] if isinstance(r, dict) else getattr(r, k)
    return total


def run_point(point, pool=None, n_jobs=1):
    """Aggregate ``trials`` trials at one grid point."""
    base = point.base
    if pool is None or pool.l2_size != point.l2_size:
        pool = build_pool(base.n, point.l2_size)
    parallel = Parallel(n_jobs=n_jobs)
    failures, reasons = 0, {}
    if point.stage == "type1":
        sizes = [min(TYPE1_CHUNK, base.trials - s) for s in range(0, base.trials, TYPE1_CHUNK)]
        results = parallel(delayed(_type1_chunk)(point, pool, i, size) for i, size in enumerate(sizes))
        counts = _sum_counts(c for _, c in sorted(results, key=lambda r: r[0]))
    else:
        batches = [range(s, min(s + FULL_BATCH, base.trials)) for s in range(0, base.trials, FULL_BATCH)]
        results = parallel(delayed(run_trials)(point, pool, b) for b in batches)
        outcomes = sorted((o for batch in results for o in batch), key=lambda o: o.index)
        ok = [o for o in outcomes if o.failure is None]
        for o in outcomes:
            if o.failure is not None:
                failures += 1
                key = o.failure.split(":", 1)[0]
                reasons[key] = reasons.get(key, 0) + 1
        if failures:
            logger.warning("%d of %d trials failed at %s=%s: %s", failures, base.trials, base.sweep_var, point.value, reasons)
        counts = _sum_counts(ok)
    return GridPointStats(
        value=point.value,
        counts=counts,
        trials=base.trials - failures,
        failures=failures,
        failure_reasons=reasons,
        theory=point.theory(),
    )


def run_experiment(config, n_jobs=1):
    """Run every grid point of ``config`` and attach closed-form predictions."""
    points = []
    pool = None
    for value in config.sweep_values:
        point = config.at(value)
        if pool is None or pool.l2_size != point.l2_size:
            pool = build_pool(config.n, point.l2_size)
        logger.info("running %s=%s (%d trials)", config.sweep_var, value, config.trials)
        points.append(run_point(point, pool, n_jobs=n_jobs))
    return ErrorStats(config=config, points=points)
