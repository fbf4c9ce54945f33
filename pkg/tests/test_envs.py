"""Population generation, reward draws, schedules, and export."""

import csv
import os

import numpy as np
import pytest

from hierbandit.core import TaskInstance
from hierbandit.envs import (InteractionSchedule, Population, PopulationSpec,
                             RewardTable, agent_rng, atomic_write_text,
                             draw_reward, generate_misspecified,
                             generate_population, make_schedule, noise_rng,
                             population_rng, population_to_csv)
from hierbandit.errors import ConfigError, ScheduleError


def _spec(**kw):
    base = dict(n_tasks=5, horizon=4, n_arms=2, dim=3, seed=0)
    base.update(kw)
    return PopulationSpec(**base)


def test_spec_validation():
    with pytest.raises(ConfigError):
        _spec(n_tasks=0)
    with pytest.raises(ConfigError):
        _spec(dim=1)            # dim < n_arms
    with pytest.raises(ConfigError):
        _spec(sigma1_sq=-0.1)
    with pytest.raises(ConfigError):
        _spec(reward_kind="poisson")
    with pytest.raises(ConfigError):
        _spec(misspec_lambda=1.5)
    with pytest.raises(ConfigError):
        _spec(reward_kind="bernoulli", psi=0.0)
    assert _spec(sigma1_sq=0.0).sigma1_sq == 0.0


def test_spec_derived_quantities():
    spec = _spec(n_tasks=3, n_arms=2, dim=5)
    assert spec.p == 2 * 3
    np.testing.assert_allclose(spec.scale, 1.0 / 5.0)
    assert _spec(theta_scale=0.7).scale == 0.7
    cfg = spec.hierarchy_config()
    np.testing.assert_allclose(cfg.sigma_theta, np.eye(5) / 5.0)
    np.testing.assert_allclose(cfg.sigma_delta,
                               spec.sigma1_sq * np.eye(2))


def test_generator_realizable_case():
    spec = _spec(sigma1_sq=0.0, n_tasks=8)
    pop = generate_population(spec)
    for task in pop.tasks:
        phi = pop.feature_map.task_features(task.metadata)
        np.testing.assert_allclose(task.true_means, phi @ pop.theta,
                                   atol=1e-12)


def test_generator_effect_covariance():
    spec = _spec(n_tasks=10_000, sigma1_sq=0.3, seed=1)
    pop = generate_population(spec)
    resid = np.zeros((spec.n_tasks, spec.n_arms))
    for i, task in enumerate(pop.tasks):
        phi = pop.feature_map.task_features(task.metadata)
        resid[i] = task.true_means - phi @ pop.theta
    emp = np.cov(resid.T)
    np.testing.assert_allclose(emp, 0.3 * np.eye(spec.n_arms), atol=0.015,
                               rtol=0.05)


def test_generator_bernoulli_symmetric_mean():
    # theta ~ N(0, scale) with a tiny scale pins the logistic means at 1/2;
    # the Beta draw around 1/2 is symmetric, so arm means average to 1/2.
    spec = _spec(n_tasks=10_000, reward_kind="bernoulli", psi=1.0,
                 theta_scale=1e-18, seed=2)
    pop = generate_population(spec)
    means = np.stack([t.true_means for t in pop.tasks])
    se = means.std() / np.sqrt(means.size)
    assert abs(means.mean() - 0.5) <= 4.0 * se


def test_misspec_lambda_one_identical():
    spec = _spec(n_tasks=50, misspec_lambda=1.0, seed=3)
    a = generate_population(spec)
    b = generate_misspecified(spec)
    np.testing.assert_array_equal(a.theta, b.theta)
    for ta, tb in zip(a.tasks, b.tasks):
        np.testing.assert_array_equal(ta.true_means, tb.true_means)
        np.testing.assert_array_equal(ta.metadata, tb.metadata)


def test_misspec_normalization_constant():
    spec = _spec(n_tasks=200, misspec_lambda=0.0, sigma1_sq=0.0, seed=4)
    pop = generate_misspecified(spec)
    linear_spec = _spec(n_tasks=200, misspec_lambda=1.0, sigma1_sq=0.0, seed=4)
    linear_pop = generate_population(linear_spec)
    linear = np.stack([
        linear_pop.feature_map.task_features(t.metadata) @ linear_pop.theta
        for t in linear_pop.tasks])
    peak = np.abs(linear).max()
    c = (np.pi / 2.0) / peak
    assert np.abs(c * linear).max() <= np.pi / 2.0 + 1e-12
    # lambda = 0 means pure warped centers cos(c m)/c
    warped = np.cos(c * linear) / c
    got = np.stack([t.true_means for t in pop.tasks])
    np.testing.assert_allclose(got, warped, atol=1e-12)


def test_misspec_rejects_bernoulli():
    with pytest.raises(ConfigError):
        generate_misspecified(_spec(reward_kind="bernoulli",
                                    misspec_lambda=0.5))


def test_draw_reward_zero_noise():
    task = TaskInstance(0, np.zeros(2), np.array([0.4, -0.1]))
    rng = np.random.default_rng(0)
    got = draw_reward(task, 1, rng, sigma_noise=0.0, reward_kind="gaussian")
    assert got == -0.1


def test_draw_reward_lln():
    task = TaskInstance(0, np.zeros(2), np.array([0.7, 0.0]))
    rng = np.random.default_rng(5)
    draws = [draw_reward(task, 0, rng, sigma_noise=1.0,
                         reward_kind="gaussian") for _ in range(100_000)]
    se = np.std(draws) / np.sqrt(len(draws))
    assert abs(np.mean(draws) - 0.7) <= 4.0 * se


def test_draw_reward_bernoulli_support():
    task = TaskInstance(0, np.zeros(2), np.array([0.35]))
    rng = np.random.default_rng(6)
    draws = {draw_reward(task, 0, rng, sigma_noise=0.0,
                         reward_kind="bernoulli") for _ in range(200)}
    assert draws <= {0.0, 1.0}


def test_schedule_sequential():
    sched = make_schedule("sequential", n_tasks=2, horizon=2)
    assert list(sched.iter_with_rounds()) == [(0, 1), (0, 2), (1, 1), (1, 2)]


def test_schedule_concurrent():
    sched = make_schedule("concurrent", n_tasks=2, horizon=2)
    assert list(sched.iter_with_rounds()) == [(0, 1), (1, 1), (0, 2), (1, 2)]


def test_schedule_custom():
    sched = make_schedule("custom", n_tasks=2, horizon=2, stream=[0, 1, 1, 0])
    assert list(sched.iter_with_rounds()) == [(0, 1), (1, 1), (1, 2), (0, 2)]
    with pytest.raises(ScheduleError):
        make_schedule("custom", n_tasks=2, horizon=2, stream=[0, 0, 0, 1])
    with pytest.raises(ScheduleError):
        make_schedule("custom", n_tasks=2, horizon=2, stream=[0, 0, 1, 1, 1])
    with pytest.raises(ScheduleError):
        make_schedule("interleaved", n_tasks=2, horizon=2)
    with pytest.raises(ScheduleError):
        make_schedule("sequential", n_tasks=2, horizon=2, stream=[0, 1])


def test_reward_table_pairing():
    spec = _spec(seed=7)
    pop = generate_population(spec)
    table_a = RewardTable(pop)
    table_b = RewardTable(pop)
    assert table_a.reward(1, 2, 0) == table_b.reward(1, 2, 0)
    with pytest.raises(ScheduleError):
        table_a.reward(0, 0, 0)
    with pytest.raises(ScheduleError):
        table_a.reward(0, spec.horizon + 1, 0)


def test_reward_table_zero_noise_returns_means():
    spec = _spec(seed=8, sigma_noise=1e-300)
    pop = generate_population(spec)
    table = RewardTable(pop)
    for tid in range(spec.n_tasks):
        for arm in range(spec.n_arms):
            got = table.reward(tid, 1, arm)
            np.testing.assert_allclose(got, pop.tasks[tid].true_means[arm],
                                       atol=1e-290)


def test_reward_table_bernoulli_support():
    spec = _spec(seed=8, reward_kind="bernoulli", psi=1.0)
    pop = generate_population(spec)
    table = RewardTable(pop)
    vals = {table.reward(t, r + 1, a) for t in range(spec.n_tasks)
            for r in range(spec.horizon) for a in range(spec.n_arms)}
    assert vals <= {0.0, 1.0}


def test_rng_streams_disjoint():
    a = population_rng(0).standard_normal(4)
    b = noise_rng(0).standard_normal(4)
    c = agent_rng(0, "hier-ts").standard_normal(4)
    d = agent_rng(0, "oracle-ts").standard_normal(4)
    assert not np.allclose(a, b)
    assert not np.allclose(c, d)
    np.testing.assert_array_equal(agent_rng(3, "x").standard_normal(2),
                                  agent_rng(3, "x").standard_normal(2))


def test_population_csv_round_trip(tmp_path):
    spec = _spec(n_tasks=3, seed=9)
    pop = generate_population(spec)
    path = tmp_path / "pop.csv"
    population_to_csv(pop, str(path))
    with open(path, newline="") as fh:
        rows = list(csv.reader(fh))
    # three header rows: parameter names, values, column names
    assert rows[2][0] == "task_id"
    assert len(rows) == 3 + spec.n_tasks
    for row, task in zip(rows[3:], pop.tasks):
        assert int(row[0]) == task.task_id
        got_x = np.array([float(v) for v in row[1:1 + spec.p]])
        got_r = np.array([float(v) for v in row[1 + spec.p:]])
        np.testing.assert_array_equal(got_x, task.metadata)
        np.testing.assert_array_equal(got_r, task.true_means)


def test_atomic_write(tmp_path):
    target = tmp_path / "sub" / "file.txt"
    atomic_write_text(str(target), "hello")
    assert target.read_text() == "hello"
    atomic_write_text(str(target), "replaced")
    assert target.read_text() == "replaced"
    assert not any(p.name.startswith(".") for p in target.parent.iterdir()
                   if p != target)


def test_population_accessors():
    spec = _spec(seed=10)
    pop = generate_population(spec)
    assert pop.task(3).task_id == 3
    np.testing.assert_array_equal(
        pop.best_means, [t.true_means.max() for t in pop.tasks])
