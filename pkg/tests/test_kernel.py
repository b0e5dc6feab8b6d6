import math

import numpy as np
import pytest

from gaitfam import dp45, hybrid, kernel, models


class TestGenericIntegrator:
    def test_linear_rotation_accuracy(self):
        # y'' = -y integrated around a full turn.
        def f(t, y):
            return np.array([y[1], -y[0]])

        res = dp45.integrate(f, np.array([1.0, 0.0]), 0.0, 2.0 * math.pi,
                             rtol=1e-10, atol=1e-12)
        assert np.allclose(res.y, [1.0, 0.0], atol=1e-8)

    def test_exponential_decay(self):
        res = dp45.integrate(lambda t, y: -y, np.array([1.0]), 0.0, 3.0,
                             rtol=1e-11, atol=1e-13)
        assert res.y[0] == pytest.approx(math.exp(-3.0), rel=1e-9)

    def test_sampling_interpolant(self):
        ts = np.linspace(0.0, 2.0, 17)
        res = dp45.integrate(lambda t, y: np.array([math.cos(t)]), np.array([0.0]),
                             0.0, 2.0, t_eval=ts)
        assert np.allclose(res.sample_y[:, 0], np.sin(ts), atol=1e-7)

    def test_zero_span(self):
        res = dp45.integrate(lambda t, y: -y, np.array([2.0]), 0.5, 0.5)
        assert res.y[0] == 2.0
        assert res.nsteps == 0

    def test_matches_scipy_on_walker_dynamics(self, passive_model):
        from scipy.integrate import solve_ivp

        from gaitfam.hybrid import _stance_rhs

        rhs = _stance_rhs(passive_model, np.zeros(0))
        y0 = np.array([0.3, -0.25, -1.2, 0.4])
        mine = dp45.integrate(rhs, y0, 0.0, 0.9, rtol=1e-11, atol=1e-13)
        ref = solve_ivp(rhs, (0.0, 0.9), y0, method="DOP853", rtol=1e-12, atol=1e-13)
        assert np.allclose(mine.y, ref.y[:, -1], atol=1e-8)


class TestSpecializedKernel:
    def test_generic_and_specialized_paths_agree(self, passive_model):
        c = hybrid.point_for(passive_model, np.array([0.2, -0.3, -1.0, 0.2]), 0.7)
        fast = hybrid.flow(passive_model, c).end_state.vector
        slow_model = models.compass_gait()
        slow_model.fast_flow = None
        slow = hybrid.flow(slow_model, c).end_state.vector
        assert np.linalg.norm(fast - slow) < 1e-9

    def test_actuated_paths_agree(self):
        act = models.compass_gait(actuated=True)
        c = hybrid.point_for(act, np.array([0.2, -0.3, -1.0, 0.2]), 0.7, [2.5])
        fast = hybrid.flow(act, c).end_state.vector
        slow_model = models.compass_gait(actuated=True)
        slow_model.fast_flow = None
        slow = hybrid.flow(slow_model, c).end_state.vector
        assert np.linalg.norm(fast - slow) < 1e-9

    def test_backend_parity(self, passive_model, rng):
        impls = kernel.backends()
        if "compiled" not in impls:
            pytest.skip("compiled kernel not built")
        for _ in range(10):
            y0 = tuple(rng.uniform(-0.6, 0.6, 4))
            tau = float(rng.uniform(0.2, 1.2))
            mu0 = float(rng.uniform(-3.0, 3.0))
            params = models.compass_gait(actuated=True).fast_flow
            out = {}
            for name, impl in impls.items():
                out[name] = kernel.flow_end_specialized(params, y0, tau, mu0,
                                                        1e-10, 1e-12, backend=impl)
            y_py, y_c = np.array(out["python"][0]), np.array(out["compiled"][0])
            assert out["python"][2] == out["compiled"][2]  # same step sequence
            assert np.max(np.abs(y_py - y_c)) < 1e-12

    def test_budget_exhaustion_reported(self, monkeypatch):
        from gaitfam import _flow_py

        monkeypatch.setattr(_flow_py, "MAX_STEPS", 3)
        params = models.compass_gait().fast_flow
        with pytest.raises(RuntimeError):
            kernel.flow_end_specialized(params, (0.3, -0.2, -1.0, 0.5), 1.0,
                                        0.0, 1e-10, 1e-12, backend=_flow_py)

    def test_active_backend_reported(self):
        assert kernel.active_backend() in ("compiled", "python")
