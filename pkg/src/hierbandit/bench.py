"""Benchmark harness: config-driven regret experiments with full artifacts.

A YAML config describes one experiment: a population family, an interaction
schedule, a list of algorithms, and the seeds to run.  run_experiment plays
every (algorithm, seed) pair against common populations and common reward
noise, then writes to the output directory:

    ledger.csv     every interaction
                   (algorithm, seed, task_id, round, arm, reward, inst_regret)
    curves.csv     aggregated curves (algorithm, view, index, mean, se)
    summary.csv    cumulative regret and ratios per algorithm
    manifest.json  normalized config + seeds + versions; rerunning from the
                   manifest reproduces ledger.csv byte for byte
    *.svg          regret curves per view (when plots is enabled)

All files are written atomically and contain nothing time- or host-dependent.
"""

from __future__ import annotations

import dataclasses
import json
import os
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass

import numpy as np
import yaml

from ._version import __version__
from .agents import AgentContext, Policy, make_policy
from .envs import (InteractionSchedule, Population, PopulationSpec,
                   RewardTable, agent_rng, atomic_write_text,
                   generate_misspecified, generate_population, make_schedule)
from .errors import ConfigError
from .metrics import (Curve, RegretLedger, bayes_regret_curve,
                      cumulative_regret_by_seed, multi_task_regret_curve)
from .priors import derive_baseline_priors
from .svgplot import Series, write_line_plot

SCHEMA_VERSION = 1
OUTPUT_ENV_VAR = "HIERBANDIT_OUT"
DEFAULT_OUTPUT_DIR = "out"
ORACLE_NAME = "oracle-ts"

_POPULATION_KEYS = frozenset({
    "n_tasks", "horizon", "n_arms", "dim", "reward_kind", "sigma_noise",
    "sigma1_sq", "psi", "theta_scale", "misspec_lambda"})
_TOP_KEYS = frozenset({
    "population", "schedule", "algorithms", "seeds", "emit_mtr", "plots",
    "parallelism", "output_dir"})
_ALGORITHM_KEYS = frozenset({"name", "options", "label"})
_MANIFEST_KEYS = frozenset({"schema_version", "package_version", "config",
                            "seeds"})


def _require_mapping(obj, context: str) -> dict:
    if not isinstance(obj, dict):
        raise ConfigError("%s must be a mapping, got %s"
                          % (context, type(obj).__name__))
    return obj


def _check_keys(mapping: dict, allowed: frozenset, context: str) -> None:
    unknown = set(mapping) - allowed
    if unknown:
        raise ConfigError("unknown %s key(s): %s (allowed: %s)"
                          % (context, ", ".join(sorted(map(str, unknown))),
                             ", ".join(sorted(allowed))))


@dataclass(frozen=True)
class AlgorithmSpec:
    """One algorithm entry: registry name, options, display label."""

    name: str
    options: tuple[tuple[str, object], ...] = ()
    label: str | None = None

    @property
    def display(self) -> str:
        return self.label if self.label else self.name

    def options_dict(self) -> dict:
        return dict(self.options)

    @classmethod
    def from_entry(cls, entry) -> "AlgorithmSpec":
        if isinstance(entry, str):
            return cls(name=entry)
        entry = _require_mapping(entry, "algorithm entry")
        _check_keys(entry, _ALGORITHM_KEYS, "algorithm entry")
        if "name" not in entry:
            raise ConfigError("algorithm entry needs a name")
        options = entry.get("options") or {}
        options = _require_mapping(options, "algorithm options")
        label = entry.get("label")
        if label is not None and not isinstance(label, str):
            raise ConfigError("algorithm label must be a string")
        return cls(name=str(entry["name"]),
                   options=tuple(sorted(options.items())),
                   label=label)


@dataclass(frozen=True)
class ExperimentConfig:
    """Validated experiment description (independent of any one seed)."""

    population: tuple[tuple[str, object], ...]
    schedule_kind: str
    algorithms: tuple[AlgorithmSpec, ...]
    seeds: tuple[int, ...]
    emit_mtr: bool = True
    plots: bool = False
    parallelism: int = 1
    output_dir: str | None = None

    @classmethod
    def from_dict(cls, raw: dict) -> "ExperimentConfig":
        raw = _require_mapping(raw, "experiment config")
        _check_keys(raw, _TOP_KEYS, "experiment config")
        for key in ("population", "schedule", "algorithms", "seeds"):
            if key not in raw:
                raise ConfigError("experiment config needs %r" % key)

        pop = _require_mapping(raw["population"], "population section")
        _check_keys(pop, _POPULATION_KEYS, "population section")
        try:
            PopulationSpec(seed=0, **pop)
        except TypeError as exc:
            raise ConfigError("bad population section: %s" % exc) from None

        kind = raw["schedule"]
        if kind not in ("sequential", "concurrent"):
            raise ConfigError(
                "schedule must be 'sequential' or 'concurrent', got %r" % kind)

        entries = raw["algorithms"]
        if not isinstance(entries, (list, tuple)) or not entries:
            raise ConfigError("algorithms must be a non-empty list")
        algorithms = tuple(AlgorithmSpec.from_entry(e) for e in entries)
        names = [a.name for a in algorithms]
        if len(set(names)) != len(names):
            raise ConfigError("algorithm names must be unique; got %s" % names)

        seeds_raw = raw["seeds"]
        if isinstance(seeds_raw, bool):
            raise ConfigError("seeds must be an int or a list of ints")
        if isinstance(seeds_raw, int):
            if seeds_raw < 2:
                raise ConfigError("need at least 2 seeds for curve output")
            seeds = tuple(range(seeds_raw))
        elif isinstance(seeds_raw, (list, tuple)):
            seeds = tuple(int(s) for s in seeds_raw)
            if len(seeds) < 2:
                raise ConfigError("need at least 2 seeds for curve output")
            if len(set(seeds)) != len(seeds):
                raise ConfigError("seeds must be distinct")
        else:
            raise ConfigError("seeds must be an int or a list of ints")

        parallelism = raw.get("parallelism", 1)
        if not isinstance(parallelism, int) or parallelism < 1:
            raise ConfigError("parallelism must be a positive int")

        emit_mtr = bool(raw.get("emit_mtr", True))
        plots = bool(raw.get("plots", False))
        output_dir = raw.get("output_dir")
        if output_dir is not None and not isinstance(output_dir, str):
            raise ConfigError("output_dir must be a string")
        return cls(population=tuple(sorted(pop.items())),
                   schedule_kind=kind, algorithms=algorithms, seeds=seeds,
                   emit_mtr=emit_mtr, plots=plots, parallelism=parallelism,
                   output_dir=output_dir)

    @classmethod
    def from_file(cls, path: str) -> "ExperimentConfig":
        with open(path, "r", encoding="utf-8") as fh:
            raw = yaml.safe_load(fh)
        raw = _require_mapping(raw, "config file %s" % path)
        if "config" in raw and "schema_version" in raw:
            # A manifest written by a previous run.
            _check_keys(raw, _MANIFEST_KEYS, "manifest")
            cfg = cls.from_dict(_require_mapping(raw["config"], "manifest config"))
            seeds = tuple(int(s) for s in raw["seeds"])
            if seeds != cfg.seeds:
                cfg = dataclasses.replace(cfg, seeds=seeds)
            return cfg
        return cls.from_dict(raw)

    def population_dict(self) -> dict:
        return dict(self.population)

    def spec_for_seed(self, seed: int) -> PopulationSpec:
        return PopulationSpec(seed=int(seed), **self.population_dict())

    def run_specs(self) -> tuple[AlgorithmSpec, ...]:
        """Algorithms to simulate: configured ones plus the oracle reference
        when adjusted curves are requested and it is not already listed."""
        algorithms = list(self.algorithms)
        if self.emit_mtr and all(a.name != ORACLE_NAME for a in algorithms):
            algorithms.append(AlgorithmSpec(name=ORACLE_NAME))
        return tuple(algorithms)

    def to_manifest_dict(self) -> dict:
        config = {
            "population": self.population_dict(),
            "schedule": self.schedule_kind,
            "algorithms": [
                {"name": a.name, "options": a.options_dict(),
                 "label": a.display}
                for a in self.algorithms],
            "seeds": list(self.seeds),
            "emit_mtr": self.emit_mtr,
            "plots": self.plots,
            "parallelism": self.parallelism,
            "output_dir": self.output_dir,
        }
        return {"schema_version": SCHEMA_VERSION,
                "package_version": __version__,
                "config": config,
                "seeds": list(self.seeds)}


def resolve_output_dir(explicit: str | None, config: ExperimentConfig) -> str:
    """--out flag beats the HIERBANDIT_OUT variable beats the config's
    output_dir beats ./out."""
    if explicit:
        return explicit
    env = os.environ.get(OUTPUT_ENV_VAR)
    if env:
        return env
    if config.output_dir:
        return config.output_dir
    return DEFAULT_OUTPUT_DIR


# ---------------------------------------------------------------------------
# simulation
# ---------------------------------------------------------------------------

def simulate_run(population: Population, table: RewardTable, policy: Policy,
                 schedule: InteractionSchedule
                 ) -> tuple[list, list, list, list, list]:
    """Drive one policy through one schedule; returns the ledger columns
    (task_ids, rounds, arms, rewards, inst_regrets) in interaction order."""
    spec = population.spec
    best = population.best_means
    means = np.stack([t.true_means for t in population.tasks])
    task_ids: list[int] = []
    rounds: list[int] = []
    arms: list[int] = []
    rewards: list[float] = []
    gaps: list[float] = []

    def play(tid: int, rnd: int) -> None:
        arm = policy.act(tid)
        reward = table.reward(tid, rnd, arm)
        policy.update(tid, arm, reward)
        task_ids.append(tid)
        rounds.append(rnd)
        arms.append(arm)
        rewards.append(reward)
        gaps.append(float(best[tid] - means[tid, arm]))

    if schedule.kind == "concurrent":
        for rnd in range(1, spec.horizon + 1):
            for tid in range(spec.n_tasks):
                play(tid, rnd)
            policy.end_of_round()
    elif schedule.kind == "sequential":
        for tid in range(spec.n_tasks):
            for rnd in range(1, spec.horizon + 1):
                play(tid, rnd)
            policy.end_of_task(tid)
    else:
        for tid, rnd in schedule.iter_with_rounds():
            play(tid, rnd)
    return task_ids, rounds, arms, rewards, gaps


def make_population(spec: PopulationSpec) -> Population:
    if spec.reward_kind == "gaussian" and spec.misspec_lambda != 1.0:
        return generate_misspecified(spec)
    return generate_population(spec)


def run_pair(config: ExperimentConfig, algorithm: AlgorithmSpec, seed: int
             ) -> tuple[list, list, list, list, list]:
    """Simulate one (algorithm, seed) pair from scratch (process-safe)."""
    spec = config.spec_for_seed(seed)
    population = make_population(spec)
    table = RewardTable(population)
    priors = derive_baseline_priors(spec, population.theta)
    ctx = AgentContext(population=population, priors=priors,
                       rng=agent_rng(seed, algorithm.name),
                       schedule_kind=config.schedule_kind)
    policy = make_policy(algorithm.name, ctx, algorithm.options_dict())
    schedule = make_schedule(config.schedule_kind, spec.n_tasks, spec.horizon)
    return simulate_run(population, table, policy, schedule)


def _run_pair_args(args) -> tuple[list, list, list, list, list]:
    return run_pair(*args)


def simulate_ledger(config: ExperimentConfig) -> RegretLedger:
    """All (algorithm, seed) runs merged into one ledger, deterministically
    ordered by the config's algorithm order then seed order regardless of
    parallelism."""
    pairs = [(config, algorithm, seed)
             for algorithm in config.run_specs() for seed in config.seeds]
    if config.parallelism > 1 and len(pairs) > 1:
        with ProcessPoolExecutor(max_workers=config.parallelism) as pool:
            results = list(pool.map(_run_pair_args, pairs))
    else:
        results = [run_pair(*p) for p in pairs]
    ledger = RegretLedger()
    for (cfg, algorithm, seed), cols in zip(pairs, results):
        ledger.extend_run(algorithm.name, seed, *cols)
    return ledger


# ---------------------------------------------------------------------------
# artifacts
# ---------------------------------------------------------------------------

def _fmt_float(v: float) -> str:
    return "%.17g" % v


def write_ledger_csv(ledger: RegretLedger, path: str) -> None:
    lines = [",".join(RegretLedger.COLUMNS)]
    for alg, seed, tid, rnd, arm, reward, gap in ledger.rows():
        lines.append("%s,%d,%d,%d,%d,%s,%s"
                     % (alg, seed, tid, rnd, arm, _fmt_float(reward),
                        _fmt_float(gap)))
    atomic_write_text(path, "\n".join(lines) + "\n")


def compute_curves(ledger: RegretLedger, config: ExperimentConfig
                   ) -> dict[tuple[str, str], Curve]:
    """(algorithm, view) -> curve for both base views, plus oracle-adjusted
    views (prefixed mtr_) when enabled."""
    curves: dict[tuple[str, str], Curve] = {}
    run_names = [a.name for a in config.run_specs()]
    for name in run_names:
        for view in ("per_round_concurrent", "per_task_sequential"):
            curves[(name, view)] = bayes_regret_curve(ledger, name, view)
    if config.emit_mtr:
        for name in run_names:
            if name == ORACLE_NAME:
                continue
            for view in ("per_round_concurrent", "per_task_sequential"):
                curves[(name, "mtr_" + view)] = multi_task_regret_curve(
                    ledger, name, view, ORACLE_NAME)
    return curves


def write_curves_csv(curves: dict[tuple[str, str], Curve], path: str) -> None:
    lines = ["algorithm,view,index,mean,se"]
    for (name, view), curve in curves.items():
        for i, m, s in zip(curve.index, curve.mean, curve.se):
            lines.append("%s,%s,%d,%s,%s"
                         % (name, view, int(i), _fmt_float(float(m)),
                            _fmt_float(float(s))))
    atomic_write_text(path, "\n".join(lines) + "\n")


def write_summary_csv(ledger: RegretLedger, config: ExperimentConfig,
                      path: str) -> None:
    run_names = [a.name for a in config.run_specs()]
    totals = {name: cumulative_regret_by_seed(ledger, name)
              for name in run_names}
    means = {}
    ses = {}
    for name in run_names:
        values = np.array([totals[name][s] for s in config.seeds])
        means[name] = float(values.mean())
        ses[name] = float(values.std(ddof=1) / np.sqrt(values.shape[0]))
    lines = ["algorithm,cum_regret_mean,cum_regret_se,"
             "ratio_vs_individual_ts,ratio_vs_oracle_ts"]
    for name in run_names:
        cells = [name, _fmt_float(means[name]), _fmt_float(ses[name])]
        for ref in ("individual-ts", ORACLE_NAME):
            if ref in means and means[ref] != 0.0:
                cells.append(_fmt_float(means[name] / means[ref]))
            else:
                cells.append("")
        lines.append(",".join(cells))
    atomic_write_text(path, "\n".join(lines) + "\n")


def write_manifest(config: ExperimentConfig, path: str) -> None:
    text = json.dumps(config.to_manifest_dict(), indent=2, sort_keys=True)
    atomic_write_text(path, text + "\n")


def _label_for(config: ExperimentConfig, name: str) -> str:
    for a in config.run_specs():
        if a.name == name:
            return a.display
    return name


def write_plots(curves: dict[tuple[str, str], Curve],
                config: ExperimentConfig, out_dir: str) -> list[str]:
    written = []
    views = sorted({view for _, view in curves})
    for view in views:
        series = []
        for (name, v), curve in curves.items():
            if v != view:
                continue
            series.append(Series(label=_label_for(config, name),
                                 x=curve.index.astype(float),
                                 y=curve.cumulative()))
        if not series:
            continue
        x_label = "round" if "per_round" in view else "task position"
        path = os.path.join(out_dir, "regret_%s.svg" % view)
        write_line_plot(path, series, title="cumulative regret (%s)" % view,
                        x_label=x_label, y_label="cumulative regret")
        written.append(path)
    return written


def run_experiment(config: ExperimentConfig, output_dir: str | None = None
                   ) -> dict[str, str]:
    """Run every (algorithm, seed) pair and write all artifacts; returns a
    name -> path map of what was written."""
    out = resolve_output_dir(output_dir, config)
    os.makedirs(out, exist_ok=True)
    ledger = simulate_ledger(config)
    curves = compute_curves(ledger, config)
    paths = {
        "ledger": os.path.join(out, "ledger.csv"),
        "curves": os.path.join(out, "curves.csv"),
        "summary": os.path.join(out, "summary.csv"),
        "manifest": os.path.join(out, "manifest.json"),
    }
    write_ledger_csv(ledger, paths["ledger"])
    write_curves_csv(curves, paths["curves"])
    write_summary_csv(ledger, config, paths["summary"])
    write_manifest(config, paths["manifest"])
    if config.plots:
        for p in write_plots(curves, config, out):
            paths[os.path.basename(p)] = p
    return paths
