"""Acceptance suite: every criterion prints one PASS/FAIL line.

Run with `pytest tests/test_acceptance.py -v -s` to see the lines as
they complete. Scenario runs are shared across criteria through a
module-scoped fixture; the determinism criterion re-runs each preset
from scratch.
"""

import math
import random
from contextlib import contextmanager

import pytest

from dronesim.protocol import (
    BaroSample,
    DecodeError,
    FRAME_SIZES,
    GpsSample,
    ImuSample,
    MessageKind,
    MotorCommand,
    RcSample,
    decode,
    encode,
)
from dronesim.runner import run_sim
from dronesim.scenario import load_scenario

from .test_governor import assert_priority_safety, brute_force_memguard

PRESETS = ["baseline_hover", "fig3_mem_attack_no_guard", "fig4_mem_attack_guarded",
           "fig5_controller_kill", "fig6_udp_flood", "mem_attack_t15_no_guard"]

ATTACK_START = {"fig3_mem_attack_no_guard": 10.0, "fig4_mem_attack_guarded": 10.0,
                "mem_attack_t15_no_guard": 15.0, "fig6_udp_flood": 8.0}


@contextmanager
def criterion(number: int, description: str):
    try:
        yield
    except BaseException:
        print(f"ACCEPTANCE {number:2d} FAIL: {description}")
        raise
    print(f"ACCEPTANCE {number:2d} PASS: {description}")


@pytest.fixture(scope="module")
def runs():
    return {name: run_sim(load_scenario(name)) for name in PRESETS}


def deviation(row, setpoint=(0.0, 0.0, 1.5)):
    return math.dist(row[1:4], setpoint)


def test_criterion_01_frame_sizes():
    with criterion(1, "frame sizes are exactly 52/32/44/50/29 bytes"):
        bodies = {
            MessageKind.IMU: ImuSample((0, 0, 9.81), (0, 0, 0), (0, 0, 0)),
            MessageKind.BARO: BaroSample(1.5, 101325, 2000),
            MessageKind.GPS: GpsSample((0, 0, 1.5), (0, 0, 0), 3, 12),
            MessageKind.RC: RcSample((0, 0, 0, 0), 2),
            MessageKind.MOTOR: MotorCommand((0.4, 0.4, 0.4, 0.4), True),
        }
        expected = {MessageKind.IMU: 52, MessageKind.BARO: 32, MessageKind.GPS: 44,
                    MessageKind.RC: 50, MessageKind.MOTOR: 29}
        for kind, size in expected.items():
            assert FRAME_SIZES[kind] == size
            assert len(encode(kind, bodies[kind], 0, 0)) == size


def test_criterion_02_rate_fidelity():
    with criterion(2, "10 s run carries 2500/500/100/500 sensor and 4000 motor frames"):
        sc = load_scenario("baseline_hover")
        sc.duration_s = 10.0
        sim = run_sim(sc)
        counts = sim.log.frame_counts
        for kind, expected in (("IMU", 2500), ("BARO", 500), ("GPS", 100),
                               ("RC", 500), ("MOTOR", 4000)):
            assert abs(counts[kind] - expected) <= 1, (kind, counts[kind])


def test_criterion_03_fig3_memory_attack_crashes(runs):
    with criterion(3, "fig3 (no governor) crashes within 15 s of the memory attack"):
        log = runs["fig3_mem_attack_no_guard"].log
        assert log.outcome == "CRASHED"
        attack = ATTACK_START["fig3_mem_attack_no_guard"]
        assert log.crash_time_s is not None
        assert attack < log.crash_time_s <= attack + 15.0
        # position deviation grows monotonically (windowed envelope)
        span = log.crash_time_s - attack
        windows = [attack + span * k / 4 for k in range(5)]
        env = []
        for lo, hi in zip(windows, windows[1:]):
            env.append(max(deviation(r) for r in log.trajectory if lo <= r[0] <= hi))
        assert all(a < b for a, b in zip(env, env[1:])), env


def test_criterion_04_fig4_guarded_stays_stable(runs):
    with criterion(4, "fig4 (with governor) stays stable, deviation < 1.0 m"):
        log = runs["fig4_mem_attack_guarded"].log
        assert log.outcome in ("STABLE", "SWITCHED_STABLE")
        attack = ATTACK_START["fig4_mem_attack_guarded"]
        worst = max(deviation(r) for r in log.trajectory if r[0] >= attack)
        assert worst < 1.0, worst


def test_criterion_05_fig5_kill_detected_by_rx_rule(runs):
    with criterion(5, "fig5 controller kill trips rx-interval in (12, 12.0525] and recovers"):
        log = runs["fig5_controller_kill"].log
        assert log.outcome == "SWITCHED_STABLE"
        violations = [ev for ev in log.monitor_events if ev[1] == "violation"]
        assert violations and "rx_interval" in violations[0][2]
        switch = log.switch_time_s
        assert 12.0 < switch <= 12.0 + 0.050 + 0.0025
        # post-switch attitude errors converge below 2 degrees within 5 s
        bound = math.radians(2.0)
        for row in log.trajectory:
            if row[0] >= switch + 5.0:
                assert abs(row[4]) < bound and abs(row[5]) < bound and \
                    abs(row[6]) < bound, row


def test_criterion_06_fig6_flood_trips_attitude_rule(runs):
    with criterion(6, "fig6 flood trips the attitude rule after 8 s and recovers"):
        log = runs["fig6_udp_flood"].log
        assert log.outcome == "SWITCHED_STABLE"
        violations = [ev for ev in log.monitor_events if ev[1] == "violation"]
        assert violations and "attitude" in violations[0][2]
        assert violations[0][0] > 8.0
        switch = log.switch_time_s
        bounds = (0.35, 0.35, 0.70)
        for row in log.trajectory:
            if row[0] >= switch + 5.0:
                assert all(abs(e) < b for e, b in zip(row[4:7], bounds)), row


def test_criterion_07_memguard_oracle_equivalence():
    with criterion(7, "governor matches brute-force budget enumeration on 20 instances"):
        from dronesim.governor import Governor, MemGuardConfig, TaskSpec
        from dronesim.kernel import Engine, ticks_from_s

        rng = random.Random(20260810)
        for trial in range(20):
            rate = rng.choice([1e5, 2e5, 5e5, 1e6])
            period_us = 1000
            max_budget = int(rate * period_us / 1e6 * 0.9)
            budget = rng.randint(10, max(11, max_budget))
            demand = rng.randint(50, 3000)
            per_period, completion_period = brute_force_memguard(
                demand, budget, rate, period_us
            )
            engine = Engine()
            gov = Governor(
                engine,
                MemGuardConfig(enabled=True, budget_per_core=(budget, 0, 0, 0)),
                service_rate=rate, record_periods=True,
            )
            gov.register_task(TaskSpec("m", core=0, priority=10, mem_demand=demand))
            job = gov.submit_job("m")
            engine.run_until(ticks_from_s(1.0))
            served = [row[1][0] for row in gov.period_log]
            assert len(served) == len(per_period), (trial, served, per_period)
            for got, want in zip(served, per_period):
                assert got == pytest.approx(want, abs=1e-3), (trial, served, per_period)
            assert job.record.complete_tick // period_us == completion_period
            assert all(s == pytest.approx(min(budget, demand), abs=1e-3)
                       for s in served[:-1])
            assert len(served) == math.ceil(demand / budget)


def test_criterion_08_scheduler_and_link_properties(runs):
    with criterion(8, "priority safety, budget caps and link conservation hold on all traces"):
        for name, sim in runs.items():
            assert_priority_safety(sim.governor)
            mg = sim.log.memguard_summary
            assert mg["budget_violations"] == 0, name
            if mg["enabled"]:
                for core, served in enumerate(mg["max_served_per_period"]):
                    budget = sim.scenario.memguard.budget(core)
                    if budget is not None:
                        assert served <= budget + 1e-6, (name, core, served)
            for link_name, stats in sim.log.link_stats.items():
                assert stats["sent"] == (
                    stats["delivered"] + stats["dropped_ratelimit"]
                    + stats["dropped_overflow"] + stats["in_flight"]
                ), (name, link_name)


def _random_body(kind, rng):
    if kind == MessageKind.IMU:
        return ImuSample(
            tuple(rng.uniform(-30, 30) for _ in range(3)),
            tuple(rng.uniform(-30, 30) for _ in range(3)),
            tuple(rng.uniform(-3.14, 3.14) for _ in range(3)),
        )
    if kind == MessageKind.BARO:
        return BaroSample(rng.uniform(-100, 5000), rng.randrange(2**32),
                          rng.randrange(-32768, 32768))
    if kind == MessageKind.GPS:
        return GpsSample(
            tuple(rng.uniform(-10000, 10000) for _ in range(3)),
            tuple(rng.uniform(-30, 30) for _ in range(3)),
            rng.randrange(256), rng.randrange(256),
        )
    if kind == MessageKind.RC:
        return RcSample(tuple(rng.uniform(-1, 1) for _ in range(4)),
                        rng.randrange(256))
    return MotorCommand(tuple(rng.uniform(0, 1) for _ in range(4)),
                        bool(rng.randrange(2)))


def test_criterion_09_codec_robustness():
    with criterion(9, "100k random decodes never escape; 10k roundtrips per kind hold"):
        rng = random.Random(99)
        outcomes = 0
        for _ in range(100_000):
            data = rng.randbytes(rng.randrange(0, 513))
            try:
                decode(data)
                outcomes += 1
            except DecodeError:
                outcomes += 1
        assert outcomes == 100_000
        for kind in MessageKind:
            for _ in range(10_000):
                body = _random_body(kind, rng)
                frame = encode(kind, body, rng.randrange(256), rng.randrange(2**32))
                got_kind, got_body, _, _ = decode(frame)
                assert got_kind == kind
                # requantized roundtrip is exact
                frame2 = encode(kind, got_body, 0, 0)
                assert decode(frame2)[1] == got_body


def test_criterion_10_determinism(runs):
    with criterion(10, "identical seeds give byte-identical CSV and JSON for every preset"):
        for name, first in runs.items():
            second = run_sim(load_scenario(name))
            assert first.log.to_csv() == second.log.to_csv(), name
            assert first.log.to_json() == second.log.to_json(), name
