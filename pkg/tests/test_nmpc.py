import dataclasses

import numpy as np
import pytest

from _helpers import random_state
from l1nmpc import kernels
from l1nmpc.errors import InvalidArgument, SolverError
from l1nmpc.nmpc import (NMPC, OcpConfig, ReferenceWindow, Solution, condense, condensed_qp,
                         integrator_update, linearize, shift_warm_start, solve, tracking_cost)
from l1nmpc.rigid_body import RotorCommand, VehicleState


@pytest.fixture
def ocp(scenario):
    return scenario.ocp


def hover_ref(params, ocp, position=(0.0, 0.0, 2.0)):
    return ReferenceWindow.constant(VehicleState(position=position),
                                    RotorCommand([params.hover_thrust] * 4), ocp.horizon_steps)


def central_jacobians(x, u, p, dt, h=1e-7):
    def f(xx, uu):
        return kernels.rk4(xx, uu, p, dt, np.zeros(3), np.zeros(3), False)

    a = np.empty((13, 13))
    b = np.empty((13, 4))
    for i in range(13):
        e = np.zeros(13)
        e[i] = h
        a[:, i] = (f(x + e, u) - f(x - e, u)) / (2 * h)
    for i in range(4):
        e = np.zeros(4)
        e[i] = h
        b[:, i] = (f(x, u + e) - f(x, u - e)) / (2 * h)
    return a, b


class TestConfig:
    def test_grouped_weights_expand(self):
        cfg = OcpConfig(horizon_steps=5, horizon_time=0.5, state_weights=(1, 2, 3, 4),
                        input_weights=1.0)
        assert cfg.state_weights == (1, 1, 1, 2, 2, 2, 2, 3, 3, 3, 4, 4, 4)
        assert cfg.input_weights == (1, 1, 1, 1)
        assert cfg.dt == pytest.approx(0.1)

    @pytest.mark.parametrize("change", [{"horizon_steps": 1}, {"horizon_time": 0.0},
                                        {"state_weights": (0,) * 13}, {"input_weights": -1.0},
                                        {"sqp_iters_per_step": 0}])
    def test_invalid(self, ocp, change):
        with pytest.raises(InvalidArgument):
            dataclasses.replace(ocp, **change)


class TestLinearize:
    def test_kinematic_coupling(self, params):
        x = VehicleState(position=[0, 0, 2])
        a, _ = linearize(x, RotorCommand([params.hover_thrust] * 4), 0.05, params)
        # linear drag k gives dp/dv = (1 - exp(-k dt)) / k per axis
        k = np.array(params.drag_matrix_diag)
        assert np.allclose(a[0:3, 7:10], np.diag((1 - np.exp(-k * 0.05)) / k), atol=1e-6)

    def test_thrust_column(self, params):
        _, b = linearize(VehicleState(), RotorCommand([params.hover_thrust] * 4), 0.01, params)
        # vertical velocity gain per rotor, with linear drag k_z on the vertical axis
        kz = params.drag_matrix_diag[2]
        assert np.allclose(b[9], (1 - np.exp(-kz * 0.01)) / (kz * params.mass), atol=1e-7)

    def test_matches_central_differences(self, params, rng):
        for _ in range(100):
            x = random_state(rng)
            u = rng.uniform(0.5, 5.0, 4)
            a, b = linearize(x, u, 0.05, params)
            ao, bo = central_jacobians(x, u, params.packed, 0.05)
            assert np.abs(a - ao).max() <= 1e-4 * max(1.0, np.abs(ao).max())
            assert np.abs(b - bo).max() <= 1e-4 * max(1.0, np.abs(bo).max())

    def test_batched_matches_single(self, params, rng):
        xs = np.array([random_state(rng) for _ in range(4)])
        us = rng.uniform(0.5, 5.0, (3, 4))
        a, b = kernels.linearize_traj(xs, us, params.packed, 0.05)
        for k in range(3):
            ak, bk = linearize(xs[k], us[k], 0.05, params)
            assert np.array_equal(a[k], ak) and np.array_equal(b[k], bk)


class TestSolve:
    def test_hover_is_stationary(self, params, ocp):
        ref = hover_ref(params, ocp)
        sol = solve(ref.states[0], ref, None, ocp, params)
        assert np.allclose(sol.inputs[0], params.hover_thrust, atol=1e-6)
        assert sol.qp_status == "optimal"

    def test_climb_command(self, params, ocp):
        ref = hover_ref(params, ocp, position=(0, 0, 3.0))
        sol = solve(VehicleState(position=[0, 0, 2]), ref, None, ocp, params)
        assert sol.first_input.collective > params.mass * params.gravity

    def test_unreachable_thrust_is_clipped(self, params, ocp):
        ref = ReferenceWindow.constant(VehicleState(position=[0, 0, 100.0]),
                                       RotorCommand([params.thrust_max + 5.0] * 4),
                                       ocp.horizon_steps)
        sol = solve(VehicleState(), ref, None, ocp, params)
        assert np.all(sol.inputs == params.thrust_max)

    def test_inputs_within_bounds(self, params, ocp, rng):
        for _ in range(5):
            x0 = random_state(rng, spread=0.5)
            sol = solve(x0, hover_ref(params, ocp), None, ocp, params)
            assert np.all(sol.inputs >= params.thrust_min)
            assert np.all(sol.inputs <= params.thrust_max)

    def test_cost_not_increased_over_guess(self, params, ocp, rng):
        ref = hover_ref(params, ocp)
        for _ in range(5):
            x0 = random_state(rng, spread=0.3)
            guess = np.clip(ref.inputs + rng.normal(0, 0.3, ref.inputs.shape), 0, params.thrust_max)
            warm = Solution(guess, np.zeros((ocp.horizon_steps + 1, 13)))
            sol = solve(x0, ref, warm, ocp, params)
            states = kernels.rollout(x0, guess, params.packed, ocp.dt)
            assert sol.cost <= tracking_cost(states, guess, ref, ocp) + 1e-12

    def test_deterministic(self, params, ocp, rng):
        x0 = random_state(rng, spread=0.3)
        a = solve(x0, hover_ref(params, ocp), None, ocp, params)
        b = solve(x0, hover_ref(params, ocp), None, ocp, params)
        assert np.array_equal(a.inputs, b.inputs) and np.array_equal(a.states, b.states)

    def test_bad_inputs(self, params, ocp):
        ref = hover_ref(params, ocp)
        with pytest.raises(SolverError):
            solve(np.full(13, np.nan), ref, None, ocp, params)
        short = ReferenceWindow(ref.states[:5], ref.inputs[:4])
        with pytest.raises(InvalidArgument):
            solve(ref.states[0], short, None, ocp, params)

    def test_condensed_qp_gradient(self, params, ocp, rng):
        # the QP gradient is the derivative of the rolled-out cost (Gauss-Newton, zero residual curvature)
        cfg = dataclasses.replace(ocp, horizon_steps=3, horizon_time=0.15)
        ref = hover_ref(params, cfg)
        x0 = random_state(rng, spread=0.2)
        u = ref.inputs + 0.1
        qp = condensed_qp(x0, u, ref, cfg, params)

        def cost(uu):
            return 0.5 * tracking_cost(kernels.rollout(x0, uu, params.packed, cfg.dt), uu, ref, cfg)

        h = 1e-6
        fd = np.array([(cost(u + h * e.reshape(3, 4)) - cost(u - h * e.reshape(3, 4))) / (2 * h)
                       for e in np.eye(12)])
        assert np.allclose(qp.grad, fd, rtol=1e-4, atol=1e-5)

    def test_condense_structure(self, rng):
        a = rng.standard_normal((3, 13, 13))
        b = rng.standard_normal((3, 13, 4))
        gam = condense(a, b)
        assert np.allclose(gam[0][:, 0:4], b[0])
        assert np.allclose(gam[2][:, 0:4], a[2] @ a[1] @ b[0])
        assert np.allclose(gam[0][:, 4:], 0)


class TestShift:
    def test_shift_semantics(self):
        inputs = np.array([[1.0] * 4, [2.0] * 4, [3.0] * 4])
        states = np.arange(4 * 13, dtype=float).reshape(4, 13)
        s = shift_warm_start(Solution(inputs, states))
        assert np.array_equal(s.inputs[:, 0], [2, 3, 3])
        assert np.array_equal(s.states[0], states[1])
        assert np.array_equal(s.states[-1], states[-1])

    def test_hover_fixed_point(self, params, ocp):
        ref = hover_ref(params, ocp)
        sol = Solution(ref.inputs.copy(), ref.states.copy())
        s = shift_warm_start(sol)
        assert np.array_equal(s.inputs, sol.inputs) and np.array_equal(s.states, sol.states)

    def test_fractional_shift_interpolates(self):
        inputs = np.array([[0.0] * 4, [10.0] * 4])
        s = shift_warm_start(Solution(inputs, np.zeros((3, 13))), fraction=0.2)
        assert np.allclose(s.inputs[:, 0], [2.0, 10.0])

    def test_bad_fraction(self):
        with pytest.raises(InvalidArgument):
            shift_warm_start(Solution(np.zeros((2, 4)), np.zeros((3, 13))), fraction=0.0)


class TestIntegrator:
    def test_zero_error(self, ocp):
        assert np.array_equal(integrator_update(np.array([1.0, 2, 3]), np.zeros(3), 0.01, ocp),
                              [1, 2, 3])

    def test_rectangle_rule(self, ocp):
        s = np.zeros(3)
        for _ in range(100):
            s = integrator_update(s, [0, 0, 0.1], 0.01, ocp)
        assert s[2] == pytest.approx(0.1, abs=1e-12)

    def test_leak_fixed_point(self, ocp):
        cfg = dataclasses.replace(ocp, integrator_leak=0.5)
        s = np.zeros(3)
        for _ in range(20000):
            s = integrator_update(s, [0.2, 0, 0], 0.01, cfg)
        assert s[0] == pytest.approx(0.2 / 0.5, rel=1e-9)

    def test_reference_offset(self, params, ocp):
        cfg = dataclasses.replace(ocp, integrator_enabled=True, integrator_weight=(0, 0, 2.0))
        ctrl = NMPC(params, cfg, 0.01)
        ref = hover_ref(params, cfg)
        # vehicle sits 0.1 m low: the integral builds and the controller asks for more thrust
        x = VehicleState(position=[0, 0, 1.9]).as_array()
        first = ctrl.step(x, ref).first_input.collective
        for _ in range(50):
            last = ctrl.step(x, ref).first_input.collective
        assert ctrl.integral[2] == pytest.approx(-0.1 * 0.51, rel=1e-9)
        assert last > first


class TestClosedLoop:
    def test_hover_drift(self, params, ocp):
        ctrl = NMPC(params, ocp, 0.01)
        ref = hover_ref(params, ocp)
        x = ref.states[0].copy()
        for _ in range(500):
            u = ctrl.step(x, ref).inputs[0]
            for _ in range(10):
                x = kernels.rk4(x, u, params.packed, 1e-3, np.zeros(3), np.zeros(3), True)
        assert np.linalg.norm(x[0:3] - ref.states[0, 0:3]) < 1e-4
