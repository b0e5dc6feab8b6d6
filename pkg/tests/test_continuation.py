import math
from concurrent.futures import ThreadPoolExecutor

import numpy as np
import pytest

from gaitfam import continuation, hybrid, models
from gaitfam.continuation import (BoxBounds, ContinuationMap, classify_scan,
                                  cm_curve, cm_step, constant_control_map,
                                  projected_newton)
from gaitfam.errors import CorrectorError, InputError, StepFailureError

from conftest import circle_map
from oracles import box_constrained_lsq


class TestIndicator:
    def test_matches_grid_bracket_count(self, passive_model, scan_result):
        seeds, samples = scan_result
        vals = [v for _, v in samples]
        brackets = sum(1 for i in range(len(vals) - 1) if vals[i] * vals[i + 1] <= 0)
        assert len(seeds) == brackets == 2

    def test_sign_structure_around_first_root(self, passive_model):
        lo = continuation.indicator(passive_model, np.zeros(4), [], 0.60)
        mid = continuation.indicator(passive_model, np.zeros(4), [], 0.65)
        assert lo * mid < 0.0

    def test_finite_over_window(self, scan_result):
        _, samples = scan_result
        assert all(np.isfinite(v) for _, v in samples)
        assert len(samples) == 101


class TestScan:
    def test_two_singular_gaits(self, scan_result):
        seeds, _ = scan_result
        assert len(seeds) == 2
        assert seeds[0].indicator_root == pytest.approx(0.62, abs=0.01)
        assert seeds[1].indicator_root == pytest.approx(0.68, abs=0.01)
        for s in seeds:
            assert abs(s.indicator_value) < 1e-8
            assert s.null_dim == 2

    def test_tangents_are_unit_and_time_orthogonal(self, scan_result):
        seeds, _ = scan_result
        for s in seeds:
            for vec in (s.tangent, s.trace_direction):
                assert np.linalg.norm(vec) == pytest.approx(1.0, abs=1e-10)
                assert abs(vec[4]) < 1e-12

    def test_hanging_equilibrium_seeds_brachiation(self, passive_model):
        x_pi = np.array([math.pi, math.pi, 0.0, 0.0])
        seeds, samples = continuation.scan_singular(passive_model, x_pi, [],
                                                    interval=(0.1, 3.0), steps=60)
        vals = [v for _, v in samples]
        brackets = sum(1 for i in range(len(vals) - 1) if vals[i] * vals[i + 1] <= 0)
        assert len(seeds) == brackets
        assert len(seeds) >= 1

    def test_interval_validation(self, passive_model):
        with pytest.raises(InputError):
            continuation.scan_singular(passive_model, np.zeros(4), [], interval=(1.0, 0.1))
        with pytest.raises(InputError):
            continuation.scan_singular(passive_model, np.zeros(4), [], steps=0)


class TestDiagnostics:
    def test_rootless_window_is_no_crossing(self, passive_model):
        seeds, samples = continuation.scan_singular(passive_model, np.zeros(4), [],
                                                    interval=(0.9, 1.0), steps=20)
        assert not seeds
        report = classify_scan(samples, 0)
        assert report.classification == "no-crossing"
        assert report.remediation

    def test_decoupled_coordinate_gives_constant_zero(self):
        model = models.decoupled_double()
        seeds, samples = continuation.scan_singular(model, np.zeros(4), [],
                                                    interval=(0.2, 1.0), steps=12)
        assert not seeds
        report = classify_scan(samples, 0)
        assert report.classification == "constant-zero"
        assert report.max_abs_indicator < 1e-12

    def test_ok_classification(self, scan_result):
        seeds, samples = scan_result
        assert classify_scan(samples, len(seeds)).classification == "ok"


class TestProjectedNewton:
    def test_linear_system_single_iteration(self):
        amat = np.array([[2.0, 1.0], [0.5, -1.5]])
        bvec = np.array([1.0, -2.0])
        res = projected_newton(lambda z: amat @ z - bvec, np.zeros(2))
        assert res.converged
        assert res.iterations <= 2
        assert np.allclose(res.point, np.linalg.solve(amat, bvec), atol=1e-9)

    def test_clamp_semantics_report_residual(self):
        bounds = BoxBounds(np.array([0.0]), np.array([np.inf]))
        res = projected_newton(lambda z: z + 1.0, np.array([0.5]), bounds=bounds)
        assert res.point[0] == 0.0
        assert not res.converged
        assert res.residual_norm == pytest.approx(1.0)
        assert res.at_bounds[0]

    def test_active_slack_matches_enumeration_oracle(self):
        # Knee-style toy: the joint block has an exact root, the slack's
        # equation is infeasible under s >= 0, so the slack clamps at its
        # bound; cross-checked by brute-force box least squares.
        amat = np.array([[2.0, 1.0, 0.0], [1.0, -1.0, 0.0], [0.0, 0.0, 1.0]])
        bvec = np.array([1.0, -0.5, -0.2])
        lower = np.array([-np.inf, -np.inf, 0.0])
        upper = np.full(3, np.inf)
        expected, _ = box_constrained_lsq(amat, bvec, lower, upper)
        res = projected_newton(lambda z: amat @ z - bvec, np.array([0.3, 0.3, 0.4]),
                               bounds=BoxBounds(lower, upper))
        assert np.allclose(res.point, expected, atol=1e-9)
        assert res.point[2] == 0.0
        assert res.at_bounds[2]
        assert not res.converged
        assert res.residual_norm == pytest.approx(0.2, abs=1e-9)

    def test_iteration_budget_raises_with_iterate(self):
        # The root sits at infinity: Newton keeps doubling the iterate, so
        # the budget runs out before the residual drops below tolerance.
        with pytest.raises(CorrectorError) as err:
            projected_newton(lambda z: np.array([1.0 / z[0]]), np.array([1.0]),
                             maxit=8)
        assert err.value.point is not None
        assert err.value.residual_norm > 1e-10
        assert err.value.iterations == 8

    def test_bounds_validation(self):
        with pytest.raises(InputError):
            BoxBounds(np.array([1.0]), np.array([0.0]))


class TestCmStep:
    def test_circle_step(self):
        z = cm_step(circle_map(), np.array([1.0, 0.0]), np.array([0.0, 1.0]), 0.1)
        assert abs(z[0] ** 2 + z[1] ** 2 - 1.0) < 1e-10
        assert np.array([0.0, 1.0]) @ (z - [1.0, 0.0]) == pytest.approx(0.1, abs=1e-10)

    def test_zero_step_is_fixed_point(self):
        z = cm_step(circle_map(), np.array([1.0, 0.0]), np.array([0.0, 1.0]), 0.0)
        assert np.allclose(z, [1.0, 0.0], atol=1e-12)

    def test_requires_unit_tangent(self):
        with pytest.raises(InputError):
            cm_step(circle_map(), np.array([1.0, 0.0]), np.array([0.0, 2.0]), 0.1)

    def test_branch_switch_leaves_rest_family(self, passive_model, scan_result):
        # Within a few steps along the non-time tangent the state moves well
        # away from the equilibrium.
        seeds, _ = scan_result
        seed = seeds[0]
        cmap = constant_control_map(passive_model, [])
        c = seed.point.vector
        cdot = seed.trace_direction
        for _ in range(3):
            c = cm_step(cmap, c, cdot, 0.05)
            from gaitfam.linalg import fd_jacobian, tangent_vector

            cdot = tangent_vector(fd_jacobian(cmap.residual, c), orient=cdot)
        assert np.linalg.norm(c[:4]) > 10 * continuation.CORRECTOR_TOL


class TestCmCurve:
    def test_circle_stays_on_manifold(self):
        cur = cm_curve(circle_map(), np.array([1.0, 0.0]), np.array([0.0, 1.0]),
                       63, 0.1)
        assert cur.status == "ok"
        assert len(cur.points) == 64
        for p in cur.points:
            assert abs(p[0] ** 2 + p[1] ** 2 - 1.0) < 1e-10

    def test_orientation_never_reverses(self):
        cur = cm_curve(circle_map(), np.array([1.0, 0.0]), np.array([0.0, 1.0]),
                       100, 0.1)
        for a, b in zip(cur.tangents, cur.tangents[1:]):
            assert a @ b > 0.0

    def test_equilibrium_branch_invariance(self, passive_model):
        # Tracing from a regular rest point along the time axis keeps the
        # state and controls frozen.
        cmap = constant_control_map(passive_model, [])
        c0 = hybrid.point_for(passive_model, np.zeros(4), 0.3).vector
        e0 = np.zeros(5)
        e0[4] = 1.0
        cur = cm_curve(cmap, c0, e0, 20, 0.05)
        assert cur.status == "ok"
        for p in cur.points:
            assert np.linalg.norm(p[:4]) < 1e-12
        taus = [p[4] for p in cur.points]
        assert taus[-1] == pytest.approx(0.3 + 20 * 0.05, abs=1e-9)

    def test_partial_curve_on_dead_end(self):
        # A sphere-cap map whose curve leaves the domain where the residual
        # is defined forces step failures and a partial result.
        def residual(v):
            if abs(v[0]) > 0.8:
                raise StepFailureError("out of domain")
            return np.array([v[0] ** 2 + v[1] ** 2 - 1.0])

        cmap = ContinuationMap(residual=residual, dim=2, m=1, kind="capped")
        cur = cm_curve(cmap, np.array([0.0, 1.0]), np.array([1.0, 0.0]), 50, 0.1)
        assert cur.status == "step-failure"
        assert 0 < len(cur.points) < 51
        assert cur.message


class TestBuildFamily:
    def test_structure(self, small_family):
        assert len(small_family.seeds) == 2
        assert len(small_family.branches) == 4
        signs = {(b.seed_index, b.sign) for b in small_family.branches}
        assert signs == {(0, 1), (0, -1), (1, 1), (1, -1)}

    def test_every_gait_satisfies_map_residual(self, passive_model, small_family):
        cmap = constant_control_map(passive_model, [])
        for branch in small_family.branches:
            for g in branch.gaits:
                assert g.residual < 1e-10
                vec = np.concatenate([g.x0, [g.tau]])
                assert np.linalg.norm(cmap.residual(vec)) < 1e-10

    def test_seed_singularity_necessity(self, passive_model, small_family):
        # Branches leave the rest family only where the indicator vanishes.
        for seed in small_family.seeds:
            val = continuation.indicator(passive_model, seed.point.x0.vector,
                                         [], seed.indicator_root)
            assert abs(val) < 1e-8

    def test_empty_scan_returns_diagnostics(self, passive_model):
        c_eq = hybrid.point_for(passive_model, np.zeros(4), 0.95)
        fam = continuation.build_family(passive_model, c_eq, scan_interval=(0.9, 1.0),
                                        count=5, steps=10)
        assert fam.gait_count == 0
        assert fam.diagnostic is not None
        assert fam.diagnostic.classification == "no-crossing"
        assert fam.scan_samples

    def test_concurrent_branch_tracing(self, passive_model, scan_result):
        # Evaluations are pure; distinct branch traces may run in parallel.
        seeds, _ = scan_result
        cmap = constant_control_map(passive_model, [])

        def trace(args):
            seed, sign = args
            return cm_curve(cmap, seed.point.vector, sign * seed.trace_direction,
                            6, 0.05)

        jobs = [(seeds[0], 1), (seeds[0], -1), (seeds[1], 1), (seeds[1], -1)]
        with ThreadPoolExecutor(max_workers=4) as pool:
            results = list(pool.map(trace, jobs))
        assert all(r.status == "ok" and len(r.points) == 7 for r in results)
        assert np.allclose(results[0].points[-1][:4], -results[1].points[-1][:4],
                           atol=1e-8)


class TestMultiDim:
    def test_dimension_zero_returns_seed(self, actuated_model, scan_result):
        seeds, _ = scan_result
        seed_act = _lift_seed(actuated_model, seeds[0])
        result = continuation.multi_dim(actuated_model, seed_act, 0)
        pts = result.points_at_level(0)
        assert len(pts) == 1
        assert np.allclose(pts[0][:5], seeds[0].point.vector)

    def test_dimension_one_equals_plain_curve(self, actuated_model):
        seeds, _ = continuation.scan_singular(actuated_model, np.zeros(4), [0.0],
                                              steps=100)
        seed = seeds[1]
        result = continuation.multi_dim(actuated_model, seed, 1, count=6, h=0.05)
        cmap = constant_control_map(actuated_model, [0.0])
        direct = cm_curve(cmap, seed.point.vector, seed.trace_direction, 6, 0.05)
        forward = [c for c in result.curves if c.level == 1 and c.sign == 1][0]
        assert np.allclose(np.array(forward.points), np.array(direct.points[1:]),
                           atol=1e-10)

    def test_dimension_bounds(self, actuated_model, scan_result):
        seeds, _ = scan_result
        seed_act = _lift_seed(actuated_model, seeds[0])
        with pytest.raises(InputError):
            continuation.multi_dim(actuated_model, seed_act, 5)


def _lift_seed(actuated_model, seed):
    """Embed a passive singular gait into the actuated space (mu0 = 0)."""
    point = hybrid.point_for(actuated_model, seed.point.x0.vector,
                             seed.point.tau, [0.0])
    return continuation.SingularEG(
        point=point,
        tangent=np.concatenate([seed.tangent, [0.0]]),
        trace_direction=np.concatenate([seed.trace_direction, [0.0]]),
        indicator_root=seed.indicator_root,
        indicator_value=seed.indicator_value,
        null_dim=seed.null_dim)
