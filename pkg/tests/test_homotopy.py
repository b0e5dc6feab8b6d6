import json

import numpy as np
import pytest

from gaitfam import homotopy, hybrid, models
from gaitfam.errors import (DegenerateReferenceError, InputError,
                            StalledDescentError)
from gaitfam.homotopy import GhmProblem, QueryConstraint


def downhill_reference(family, actuated_model, slope=-0.25):
    """A passive downhill gait lifted into the actuated space."""
    best = min((g for b in family.branches for g in b.gaits),
               key=lambda g: abs(g.slope - slope))
    return hybrid.point_for(actuated_model, best.x0, best.tau, [0.0])


class TestGhmResidual:
    def test_reference_is_trivial_root(self, actuated_model, family):
        a = downhill_reference(family, actuated_model)
        q = [QueryConstraint(kind="equality", quantity="slope", target=0.0)]
        prob = GhmProblem(actuated_model, q, a)
        assert prob.p_value(prob.a_vec) == 1.0
        g_part = prob._h(prob.a_vec) - prob.p_value(prob.a_vec) * prob.h_a
        assert np.linalg.norm(g_part) == 0.0

    def test_query_roots_have_zero_parameter(self, actuated_model, family):
        a = downhill_reference(family, actuated_model)
        q = [QueryConstraint(kind="equality", quantity="slope", target=0.0)]
        prob = GhmProblem(actuated_model, q, a)
        # any point with sigma = 0 zeroes both p and the deformed residual
        z = prob.a_vec.copy()
        z[0], z[1] = 0.05, -0.05
        assert prob.p_value(z) == 0.0
        assert np.linalg.norm(prob._h(z) - prob.p_value(z) * prob.h_a) == 0.0

    def test_single_constraint_reduction(self, actuated_model, family):
        a = downhill_reference(family, actuated_model)
        q = [QueryConstraint(kind="equality", quantity="slope", target=0.0)]
        c = hybrid.point_for(actuated_model, a.x0.vector + 1e-3, a.tau, [0.0])
        res = homotopy.ghm_residual(actuated_model, q, a, c)
        per = hybrid.periodicity(actuated_model, c).residual
        sigma_a = models.slope(actuated_model, a)
        sigma_c = models.slope(actuated_model, c)
        expected_tail = sigma_c - (sigma_c / sigma_a) * sigma_a
        assert np.allclose(res[:4], per)
        assert res[4] == pytest.approx(expected_tail, abs=1e-14)

    def test_degenerate_reference_rejected(self, actuated_model):
        a = hybrid.point_for(actuated_model, np.array([0.1, -0.1, 0.2, 0.3]), 0.5, [0.0])
        q = [QueryConstraint(kind="equality", quantity="slope", target=0.0)]
        with pytest.raises(DegenerateReferenceError):
            GhmProblem(actuated_model, q, a)

    def test_projection_identity(self, actuated_model, family):
        # p equals the least-squares coefficient of H(c) on H(a).
        a = downhill_reference(family, actuated_model)
        q = [QueryConstraint(kind="equality", quantity="slope", target=0.0),
             QueryConstraint(kind="equality", quantity="step_length", target=0.4)]
        prob = GhmProblem(actuated_model, q, a)
        z = prob.a_vec + 1e-2
        h_a = prob.h_a
        h_c = prob._h(z)
        direct = float(h_a @ h_c) / float(h_a @ h_a)
        assert prob.p_value(z) == pytest.approx(direct, abs=1e-14)


class TestGhmSolve:
    def test_flat_ground_mechanics(self, actuated_model, family):
        a = downhill_reference(family, actuated_model, slope=-0.2)
        q = [QueryConstraint(kind="equality", quantity="slope", target=0.0)]
        res = homotopy.ghm_solve(actuated_model, q, a, max_iters=60)
        assert res.success
        assert abs(models.slope(actuated_model, res.root)) < 1e-6
        assert abs(res.p_values[-1]) < 1e-8
        # merit decreases across accepted steps
        for m0, m1 in zip(res.merits, res.merits[1:]):
            assert m1 < m0
        # every iterate stays on the constraint manifold
        for s in res.states:
            assert s.residual_norm < 1e-10
        # step directions lie in the tangent space of the manifold
        assert res.direction_residuals
        assert max(res.direction_residuals) < 1e-8

    def test_near_root_converges_fast(self, actuated_model, family):
        a0 = downhill_reference(family, actuated_model, slope=-0.2)
        q = [QueryConstraint(kind="equality", quantity="slope", target=0.0)]
        warm = homotopy.ghm_solve(actuated_model, q, a0, max_iters=60)
        near = warm.states[-2].point  # one accepted step before the root
        res = homotopy.ghm_solve(actuated_model, q, near, max_iters=10)
        assert res.success
        assert len(res.states) - 1 <= 3

    def test_stationary_query_stalls(self, actuated_model, family):
        # A query quantity with a positive floor has no root; the merit
        # gradient vanishes at its minimum and the solve reports a stall.
        a = downhill_reference(family, actuated_model, slope=-0.2)

        def floored(model, c):
            return models.slope(model, c) ** 2 + 0.01

        q = [QueryConstraint(kind="equality", quantity=floored, target=0.0)]
        with pytest.raises(StalledDescentError) as err:
            homotopy.ghm_solve(actuated_model, q, a, max_iters=40, step_max=0.5)
        assert err.value.point is not None

    def test_parameter_validation(self, actuated_model, family):
        a = downhill_reference(family, actuated_model)
        q = [QueryConstraint(kind="equality", quantity="slope", target=0.0)]
        with pytest.raises(InputError):
            homotopy.ghm_solve(actuated_model, q, a, alpha=0.7)
        with pytest.raises(InputError):
            homotopy.ghm_solve(actuated_model, q, a, beta=1.5)

    def test_slack_constraint_enforced(self, actuated_model, family):
        # Keep the step length above a floor while flattening the slope;
        # the slack variable rides along, stays nonnegative, and its
        # defining row is satisfied at every accepted iterate.  (A solution
        # with the bound active is exercised at the corrector level; the
        # homotopy frame is not reduced at active bounds.)
        a = downhill_reference(family, actuated_model, slope=-0.25)
        floor = 0.15
        assert models.step_length(actuated_model, a) > floor
        q = [QueryConstraint(kind="equality", quantity="slope", target=0.0),
             QueryConstraint(kind="slack", quantity="step_length", target=floor)]
        res = homotopy.ghm_solve(actuated_model, q, a, max_iters=60)
        assert res.success
        for s in res.states:
            assert s.slacks[0] >= -1e-12
            assert abs(models.step_length(actuated_model, s.point)
                       - floor - s.slacks[0]) < 1e-8
        root_len = models.step_length(actuated_model, res.root)
        assert root_len >= floor - 1e-8

    def test_infeasible_reference_rejected(self, actuated_model, family):
        a = downhill_reference(family, actuated_model, slope=-0.05)
        q = [QueryConstraint(kind="equality", quantity="slope", target=0.0),
             QueryConstraint(kind="slack", quantity="step_length", target=5.0)]
        with pytest.raises(InputError):
            homotopy.ghm_solve(actuated_model, q, a)


class TestIntegralPenalty:
    def test_nonnegative_path_gives_exact_zero(self, passive_model, family):
        g = family.branches[0].gaits[30]
        c = hybrid.point_for(passive_model, g.x0, g.tau)
        value = homotopy.integral_penalty(passive_model, c, lambda t, y: 1.0 + t)
        assert value == 0.0

    def test_passive_gait_scuffs_the_surface(self, passive_model, family):
        # The point-foot swing leg dips below the surface mid-step, so the
        # clearance penalty is strictly negative; cross-check by dense
        # sampling of the clearance profile.
        g = family.branches[1].gaits[40]
        c = hybrid.point_for(passive_model, g.x0, g.tau)
        value = homotopy.foot_clearance_integral(passive_model, c)
        assert value < 0.0
        ts = np.linspace(0.0, c.tau, 4001)
        res = hybrid.flow(passive_model, c, t_eval=ts)
        from gaitfam.dynamics import RobotState
        heights = np.array([
            models.swing_foot_height(passive_model, RobotState(y[:2], y[2:]),
                                     sigma=g.slope)
            for y in res.sample_y])
        oracle = np.trapezoid(np.minimum(heights, 0.0), ts)
        assert value == pytest.approx(oracle, abs=5e-6)

    def test_penalty_is_linear_in_violation_depth(self, passive_model):
        c = hybrid.point_for(passive_model, np.array([0.2, -0.2, -1.0, 0.1]), 0.5)
        base = homotopy.integral_penalty(passive_model, c,
                                         lambda t, y: 0.1 - t)
        double = homotopy.integral_penalty(passive_model, c,
                                           lambda t, y: 2.0 * (0.1 - t))
        assert base < 0.0
        assert double == pytest.approx(2.0 * base, rel=1e-8)

    def test_min_clearance_evaluator(self, passive_model, family):
        g = family.branches[1].gaits[40]
        c = hybrid.point_for(passive_model, g.x0, g.tau)
        assert homotopy.min_foot_clearance(passive_model, c) < 0.0


class TestQueryFiles:
    def test_load_and_kinds(self, tmp_path):
        path = tmp_path / "query.json"
        path.write_text(json.dumps({"constraints": [
            {"quantity": "slope", "op": "=", "target": 0.0},
            {"quantity": "step_length", "op": ">=", "target": 0.2, "desired": 0.5},
            {"quantity": "foot_clearance_integral", "op": "integral>=0"},
        ]}))
        cons = homotopy.load_query(path)
        assert [c.kind for c in cons] == ["equality", "slack", "integral"]
        assert cons[1].desired == 0.5

    def test_unknown_operator(self, tmp_path):
        path = tmp_path / "bad.json"
        path.write_text(json.dumps({"constraints": [
            {"quantity": "slope", "op": "<", "target": 0.0}]}))
        with pytest.raises(InputError):
            homotopy.load_query(path)

    def test_unknown_quantity(self, actuated_model, family):
        a = downhill_reference(family, actuated_model)
        q = [QueryConstraint(kind="equality", quantity="torque_budget", target=0.0)]
        with pytest.raises(InputError):
            homotopy.ghm_solve(actuated_model, q, a)
