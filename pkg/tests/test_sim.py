"""Closed-loop game simulation: controllers, strategies, termination, CSV."""

import numpy as np
import pytest

from sosevade.poly import Polynomial
from sosevade.semialg import NVARS, EnvironmentConfig
from sosevade.sim import (
    Outcome, SimConfig, Strategy, evader_control, pursuer_control, run, step,
    trace_from_csv, trace_to_csv,
)

from conftest import hand_certificate


def const(v):
    return Polynomial.constant(NVARS, v)


def var(i):
    return Polynomial.variable(i, NVARS)


def seeking_certificate(cfg, aim, gain=1.0):
    """Controller steering the evader straight toward a fixed point."""
    psi = [const(gain) * (const(aim[0]) - var(0)),
           const(gain) * (const(aim[1]) - var(1))]
    return hand_certificate(cfg, const(1.0), psi)


@pytest.fixture
def cfg():
    # near-static pursuer so hand-built controllers are easy to reason about
    return EnvironmentConfig(w_max=1e-6)


class TestStep:
    def test_integrator_exact(self, rng):
        x = rng.normal(size=4)
        u = rng.normal(size=2)
        w = rng.normal(size=2)
        got = step(x, u, w, 0.25)
        np.testing.assert_allclose(got, x + 0.25 * np.concatenate([u, w]))


class TestPursuerControl:
    def test_tail_chasing_direction(self):
        x = [1.0, 0.0, 0.0, 0.0]
        w = pursuer_control(Strategy.TAIL_CHASING, x, 0.01)
        np.testing.assert_allclose(w, [0.01, 0.0], atol=1e-15)

    def test_tail_chasing_speed(self, rng):
        for _ in range(20):
            x = rng.uniform(-3, 3, size=4)
            w = pursuer_control(Strategy.TAIL_CHASING, x, 0.01)
            assert np.linalg.norm(w) == pytest.approx(0.01, abs=1e-12)

    def test_go_to_middle_targets_midpoint(self):
        x_r = (4.0, 0.0)
        x = [0.0, 0.0, 2.0, 2.0]
        w = pursuer_control(Strategy.GO_TO_MIDDLE, x, 0.01, x_r=x_r)
        d = np.array([2.0, 0.0]) - np.array([2.0, 2.0])
        np.testing.assert_allclose(w, 0.01 * d / np.linalg.norm(d), atol=1e-15)

    def test_go_to_middle_needs_target(self):
        with pytest.raises(ValueError):
            pursuer_control(Strategy.GO_TO_MIDDLE, [0, 0, 1, 1], 0.01)

    def test_box_saturating_uses_inf_norm(self):
        w = pursuer_control(Strategy.BOX_SATURATING, [1.0, 0.5, 0.0, 0.0], 0.01)
        assert np.abs(w).max() == pytest.approx(0.01, abs=1e-15)
        assert w[0] == pytest.approx(0.01)
        assert w[1] == pytest.approx(0.005)

    def test_coincident_agents_give_zero(self):
        # chasing strategies stall when on top of the evader; go-to-middle
        # keeps moving toward the evader-target midpoint
        for strat in (Strategy.TAIL_CHASING, Strategy.BOX_SATURATING):
            w = pursuer_control(strat, [1, 1, 1, 1], 0.01)
            np.testing.assert_array_equal(w, [0.0, 0.0])
        w = pursuer_control(Strategy.GO_TO_MIDDLE, [1, 1, 1, 1], 0.01, x_r=(4, 0))
        assert np.linalg.norm(w) == pytest.approx(0.01)


class TestEvaderControl:
    def test_ratio_with_clamping(self, cfg):
        cert = hand_certificate(cfg, const(2.0), [const(0.02), const(-0.06)])
        u = evader_control(cert, np.zeros(4))
        # psi/rho = (0.01, -0.03); second axis clamps at u_max
        np.testing.assert_allclose(u, [0.01, -cfg.u_max], atol=1e-15)

    def test_singular_rho_saturates_along_psi_sign(self, cfg):
        cert = hand_certificate(cfg, const(0.0), [const(1.0), const(-2.0)])
        u = evader_control(cert, np.zeros(4), singularity_floor=1e-9)
        np.testing.assert_allclose(u, [cfg.u_max, -cfg.u_max])

    def test_respects_bound_everywhere(self, cfg, rng):
        cert = seeking_certificate(cfg, (4.0, 4.0), gain=100.0)
        for _ in range(50):
            x = rng.uniform(-4, 4, size=4)
            u = evader_control(cert, x)
            assert np.abs(u).max() <= cfg.u_max + 1e-15


class TestRun:
    def test_reaches_target(self, cfg):
        aim = (1.05 * cfg.x_r[0], 1.05 * cfg.x_r[1])
        cert = seeking_certificate(cfg, aim, gain=1.0)
        trace = run(cert, SimConfig())
        assert trace.outcome is Outcome.REACHED_TARGET
        dists = [r.dist for r in trace.rows]
        assert min(dists) > cfg.R_a

    def test_static_evader_times_out(self, cfg):
        cert = hand_certificate(cfg, const(1.0), [const(0.0), const(0.0)])
        trace = run(cert, SimConfig(t_max=5.0))
        assert trace.outcome is Outcome.TIMEOUT
        assert len(trace.rows) == 51

    def test_static_evader_is_captured(self):
        cfg = EnvironmentConfig(w_max=0.01)
        cert = hand_certificate(cfg, const(1.0), [const(0.0), const(0.0)])
        trace = run(cert, SimConfig(strategy=Strategy.TAIL_CHASING))
        assert trace.outcome is Outcome.CAPTURED
        assert trace.rows[-1].dist <= cfg.R_a

    def test_leaving_arena_detected(self, cfg):
        # steer toward a point outside the arena away from the target ball
        cert = seeking_certificate(cfg, (0.5, -4.5), gain=1.0)
        trace = run(cert, SimConfig())
        assert trace.outcome is Outcome.LEFT_ARENA

    def test_initial_state_must_be_in_initial_set(self, cfg):
        cert = hand_certificate(cfg, const(1.0), [const(0.0), const(0.0)])
        with pytest.raises(ValueError):
            run(cert, SimConfig(x0=(0.0, 0.0, 2.0, 2.0)))

    def test_dt_validation(self, cfg):
        cert = hand_certificate(cfg, const(1.0), [const(0.0), const(0.0)])
        with pytest.raises(ValueError):
            run(cert, SimConfig(dt=100.0))

    def test_time_column_uses_dt(self, cfg):
        cert = hand_certificate(cfg, const(1.0), [const(0.0), const(0.0)])
        trace = run(cert, SimConfig(t_max=1.0, dt=0.1))
        ts = [r.t for r in trace.rows]
        np.testing.assert_allclose(ts, np.arange(len(ts)) * 0.1, atol=1e-12)


class TestCsv:
    def test_round_trip(self, cfg):
        aim = (1.05 * cfg.x_r[0], 1.05 * cfg.x_r[1])
        cert = seeking_certificate(cfg, aim)
        trace = run(cert, SimConfig(t_max=3.0))
        again = trace_from_csv(trace_to_csv(trace))
        assert again.outcome is trace.outcome
        assert len(again.rows) == len(trace.rows)
        for a, b in zip(trace.rows, again.rows):
            assert a.t == pytest.approx(b.t, rel=1e-11)
            np.testing.assert_allclose(a.x, b.x, rtol=1e-11)
            np.testing.assert_allclose(a.u, b.u, rtol=1e-11, atol=1e-15)
            assert a.rho == pytest.approx(b.rho, rel=1e-11)

    def test_extra_comments_ignored(self, cfg):
        cert = hand_certificate(cfg, const(1.0), [const(0.0), const(0.0)])
        trace = run(cert, SimConfig(t_max=1.0))
        text = trace_to_csv(trace, extra_comments=["config hash abc"])
        assert trace_from_csv(text).outcome is trace.outcome

    def test_header_required(self):
        with pytest.raises(ValueError):
            trace_from_csv("nonsense\n1,2,3\n")

    def test_malformed_row_rejected(self):
        with pytest.raises(ValueError):
            trace_from_csv("t,x1,x2,x3,x4,u1,u2,w1,w2,rho,dist\n1,2,3\n")
