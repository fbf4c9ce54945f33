"""Synthetic task populations, interaction schedules, and reward draws.

A population is sampled top-down from the hierarchy: one shared coefficient
vector theta, then per-task metadata and arm means.  All randomness flows
from a single integer seed through named SeedSequence spawn keys so that
populations, reward noise, and per-agent streams are independent and
reproducible:

    spawn_key (0,)          population draw (theta, metadata, effects)
    spawn_key (1,)          common reward-noise table shared by all agents
    spawn_key (2, crc32(name))  each agent's private stream
    spawn_key (3,)          Monte Carlo work while deriving baseline priors
"""

from __future__ import annotations

import os
import zlib
from dataclasses import dataclass
from typing import Iterable, Iterator, Sequence

import numpy as np
from scipy.special import expit

from .bernoulli import MEAN_CLIP
from .core import FeatureMap, HierarchyConfig, TaskInstance
from .errors import ConfigError, ScheduleError

SCHEDULE_KINDS = ("sequential", "concurrent", "custom")
REWARD_KINDS = ("gaussian", "bernoulli")

_POPULATION_KEY = (0,)
_NOISE_KEY = (1,)
_AGENT_KEY = 2
_PRIOR_KEY = (3,)


def population_rng(seed: int) -> np.random.Generator:
    return np.random.default_rng(np.random.SeedSequence(seed, spawn_key=_POPULATION_KEY))


def noise_rng(seed: int) -> np.random.Generator:
    return np.random.default_rng(np.random.SeedSequence(seed, spawn_key=_NOISE_KEY))


def agent_rng(seed: int, algorithm_name: str) -> np.random.Generator:
    tag = zlib.crc32(algorithm_name.encode("utf-8"))
    return np.random.default_rng(np.random.SeedSequence(seed, spawn_key=(_AGENT_KEY, tag)))


def prior_rng(seed: int) -> np.random.Generator:
    return np.random.default_rng(np.random.SeedSequence(seed, spawn_key=_PRIOR_KEY))


@dataclass(frozen=True)
class PopulationSpec:
    """Parameters of a synthetic population draw.

    dim counts all coefficients; the feature map uses n_arms indicator
    columns plus a per-arm slice of the task metadata, so each task carries
    n_arms * (dim - n_arms) metadata entries.  theta_scale is the per-
    coordinate prior variance of theta (default 1/dim).  sigma1_sq is the
    task-effect variance for Gaussian rewards; psi the Beta precision for
    Bernoulli rewards.  misspec_lambda blends the linear mean with a cosine
    warp (1.0 = exactly linear; see generate_misspecified).
    """

    n_tasks: int
    horizon: int
    n_arms: int
    dim: int
    reward_kind: str = "gaussian"
    sigma_noise: float = 1.0
    sigma1_sq: float = 0.5
    psi: float = 1.0
    theta_scale: float | None = None
    misspec_lambda: float = 1.0
    seed: int = 0

    def __post_init__(self):
        if self.n_tasks < 1 or self.horizon < 1:
            raise ConfigError("n_tasks and horizon must be >= 1")
        if self.n_arms < 1:
            raise ConfigError("n_arms must be >= 1")
        if self.dim < self.n_arms:
            raise ConfigError("dim must be >= n_arms (indicator block)")
        if self.reward_kind not in REWARD_KINDS:
            raise ConfigError("reward_kind must be one of %s" % (REWARD_KINDS,))
        if self.reward_kind == "gaussian" and not self.sigma_noise > 0:
            raise ConfigError("sigma_noise must be > 0")
        if self.sigma1_sq < 0:
            raise ConfigError("sigma1_sq must be >= 0")
        if self.psi <= 0:
            raise ConfigError("psi must be > 0")
        if not 0.0 <= self.misspec_lambda <= 1.0:
            raise ConfigError("misspec_lambda must lie in [0, 1]")
        if self.theta_scale is not None and not self.theta_scale > 0:
            raise ConfigError("theta_scale must be > 0")

    @property
    def p(self) -> int:
        """Metadata length per task: n_arms * (dim - n_arms)."""
        return self.n_arms * (self.dim - self.n_arms)

    @property
    def scale(self) -> float:
        return self.theta_scale if self.theta_scale is not None else 1.0 / self.dim

    def hierarchy_config(self) -> HierarchyConfig:
        d, k = self.dim, self.n_arms
        if self.reward_kind == "gaussian":
            return HierarchyConfig(
                mu_theta=np.zeros(d),
                sigma_theta=self.scale * np.eye(d),
                sigma_delta=self.sigma1_sq * np.eye(k),
                sigma_noise=self.sigma_noise)
        return HierarchyConfig(
            mu_theta=np.zeros(d),
            sigma_theta=self.scale * np.eye(d),
            psi=self.psi)


@dataclass(frozen=True)
class Population:
    """One sampled population: true coefficients, tasks, feature map."""

    spec: PopulationSpec
    theta: np.ndarray
    tasks: tuple[TaskInstance, ...]
    feature_map: FeatureMap

    def task(self, task_id: int) -> TaskInstance:
        return self.tasks[task_id]

    @property
    def best_means(self) -> np.ndarray:
        return np.array([t.true_means.max() for t in self.tasks])


def _draw_task_frames(spec: PopulationSpec, rng: np.random.Generator
                      ) -> tuple[np.ndarray, np.ndarray, np.ndarray]:
    """(theta, metadata (N, p), linear means (N, K)); fixed draw order so
    the misspecified generator at lambda=1 is bit-identical to the plain one."""
    d, k, n = spec.dim, spec.n_arms, spec.n_tasks
    theta = rng.standard_normal(d) * np.sqrt(spec.scale)
    metadata = rng.standard_normal((n, spec.p))
    fm = FeatureMap.indicator_with_metadata(k, d)
    linear = np.stack([fm.task_features(metadata[i]) @ theta for i in range(n)])
    return theta, metadata, linear


def _blend(linear: np.ndarray, lam: float) -> np.ndarray:
    """(1 - lam) cos(c m)/c + lam m with c scaling the largest |m| to pi/2.

    c is computed once from the whole population so every task is warped by
    the same map.  lam = 1 short-circuits to the linear means unchanged.
    """
    if lam == 1.0:
        return linear
    peak = float(np.abs(linear).max())
    c = (np.pi / 2.0) / peak if peak > 0 else 1.0
    return (1.0 - lam) * np.cos(c * linear) / c + lam * linear


def _generate(spec: PopulationSpec, lam: float) -> Population:
    rng = population_rng(spec.seed)
    theta, metadata, linear = _draw_task_frames(spec, rng)
    n, k = spec.n_tasks, spec.n_arms
    centers = _blend(linear, lam)
    if spec.reward_kind == "gaussian":
        effects = rng.standard_normal((n, k)) * np.sqrt(spec.sigma1_sq)
        means = centers + effects
    else:
        probs = np.clip(expit(centers), MEAN_CLIP, 1.0 - MEAN_CLIP)
        means = rng.beta(probs / spec.psi, (1.0 - probs) / spec.psi)
    tasks = tuple(TaskInstance(task_id=i, metadata=metadata[i],
                               true_means=means[i]) for i in range(n))
    fm = FeatureMap.indicator_with_metadata(
        k, spec.dim, task_metadata={i: metadata[i] for i in range(n)})
    return Population(spec=spec, theta=theta, tasks=tasks, feature_map=fm)


def generate_population(spec: PopulationSpec) -> Population:
    """Sample a population from the hierarchy exactly as specified."""
    return _generate(spec, 1.0)


def generate_misspecified(spec: PopulationSpec) -> Population:
    """Sample a population whose mean structure is warped away from linear:

        center_{i,a} = (1 - lam) cos(c (Phi_i theta)_a) / c + lam (Phi_i theta)_a

    with lam = spec.misspec_lambda and c chosen so the largest |linear mean|
    maps to pi/2.  lam = 1 reproduces generate_population bit for bit.
    Gaussian rewards only.
    """
    if spec.reward_kind != "gaussian":
        raise ConfigError("misspecified populations support gaussian rewards only")
    return _generate(spec, spec.misspec_lambda)


def draw_reward(task: TaskInstance, arm: int, rng: np.random.Generator, *,
                sigma_noise: float, reward_kind: str) -> float:
    """One reward draw for (task, arm) under the population's noise model."""
    mean = float(task.true_means[arm])
    if reward_kind == "gaussian":
        return mean + sigma_noise * float(rng.standard_normal())
    return float(rng.uniform() < mean)


class RewardTable:
    """Pre-drawn reward noise shared by every algorithm on one seed.

    A (n_tasks, horizon, n_arms) tensor of standard normals (Gaussian) or
    uniforms (Bernoulli) drawn once from the seed's noise stream; the reward
    any algorithm sees for (task, round, arm) is then a pure function of the
    tuple, so algorithms face identical luck and regret differences are
    paired.
    """

    def __init__(self, population: Population):
        spec = population.spec
        rng = noise_rng(spec.seed)
        shape = (spec.n_tasks, spec.horizon, spec.n_arms)
        if spec.reward_kind == "gaussian":
            self._noise = rng.standard_normal(shape)
        else:
            self._noise = rng.uniform(size=shape)
        self._population = population

    def reward(self, task_id: int, round_within_task: int, arm: int) -> float:
        """Reward for pulling arm at the task's 1-based round."""
        spec = self._population.spec
        t = round_within_task - 1
        if not 0 <= t < spec.horizon:
            raise ScheduleError("round %d outside horizon %d"
                                % (round_within_task, spec.horizon))
        mean = float(self._population.tasks[task_id].true_means[arm])
        z = self._noise[task_id, t, arm]
        if spec.reward_kind == "gaussian":
            return mean + spec.sigma_noise * float(z)
        return float(z < mean)


@dataclass(frozen=True)
class InteractionSchedule:
    """Order in which (task, round-within-task) pairs are played.

    sequential: task 0 for all horizon rounds, then task 1, and so on.
    concurrent: round 1 of every task, then round 2 of every task, ...
    custom: a caller-supplied task_id stream in which every task id in
    [0, n_tasks) appears exactly horizon times.
    """

    kind: str
    n_tasks: int
    horizon: int
    stream: tuple[int, ...]

    def __len__(self) -> int:
        return self.n_tasks * self.horizon

    def iter_with_rounds(self) -> Iterator[tuple[int, int]]:
        """(task_id, round_within_task) pairs, rounds 1-based per task."""
        counter = [0] * self.n_tasks
        for tid in self.stream:
            counter[tid] += 1
            yield tid, counter[tid]


def make_schedule(kind: str, n_tasks: int, horizon: int,
                  stream: Iterable[int] | None = None) -> InteractionSchedule:
    if kind not in SCHEDULE_KINDS:
        raise ScheduleError("schedule kind must be one of %s" % (SCHEDULE_KINDS,))
    if kind == "custom":
        if stream is None:
            raise ScheduleError("custom schedule needs a task stream")
        stream = tuple(int(t) for t in stream)
        counts = np.zeros(n_tasks, dtype=np.int64)
        for tid in stream:
            if not 0 <= tid < n_tasks:
                raise ScheduleError("task id %d outside [0, %d)" % (tid, n_tasks))
            counts[tid] += 1
        if not np.all(counts == horizon):
            bad = int(np.nonzero(counts != horizon)[0][0])
            raise ScheduleError(
                "custom schedule must visit every task exactly %d times; "
                "task %d appears %d times" % (horizon, bad, int(counts[bad])))
    elif stream is not None:
        raise ScheduleError("only custom schedules accept a stream")
    elif kind == "sequential":
        stream = tuple(tid for tid in range(n_tasks) for _ in range(horizon))
    else:
        stream = tuple(tid for _ in range(horizon) for tid in range(n_tasks))
    return InteractionSchedule(kind=kind, n_tasks=n_tasks, horizon=horizon,
                               stream=stream)


def population_to_csv(population: Population, path: str) -> None:
    """Write the population to CSV: a parameter-name row, a parameter-value
    row, a column-header row, then one row per task with its metadata and
    true arm means.  Floats use repr-exact %.17g; the write is atomic."""
    spec = population.spec
    params = [("n_tasks", spec.n_tasks), ("horizon", spec.horizon),
              ("n_arms", spec.n_arms), ("dim", spec.dim),
              ("reward_kind", spec.reward_kind),
              ("sigma_noise", spec.sigma_noise), ("sigma1_sq", spec.sigma1_sq),
              ("psi", spec.psi), ("theta_scale", spec.scale),
              ("misspec_lambda", spec.misspec_lambda), ("seed", spec.seed)]
    header = ["task_id"] + ["x%d" % j for j in range(spec.p)] \
        + ["r%d" % a for a in range(spec.n_arms)]
    lines = [",".join(name for name, _ in params),
             ",".join(_csv_cell(value) for _, value in params),
             ",".join(header)]
    for task in population.tasks:
        cells = [str(task.task_id)]
        cells += ["%.17g" % v for v in task.metadata]
        cells += ["%.17g" % v for v in task.true_means]
        lines.append(",".join(cells))
    atomic_write_text(path, "\n".join(lines) + "\n")


def _csv_cell(value) -> str:
    if isinstance(value, bool):
        return str(value)
    if isinstance(value, float):
        return "%.17g" % value
    return str(value)


def atomic_write_text(path: str, text: str) -> None:
    """Write text to path via a temp file in the same directory + rename."""
    directory = os.path.dirname(os.path.abspath(path))
    os.makedirs(directory, exist_ok=True)
    tmp = os.path.join(directory, ".%s.tmp.%d" % (os.path.basename(path), os.getpid()))
    with open(tmp, "w", encoding="utf-8") as fh:
        fh.write(text)
    os.replace(tmp, path)
