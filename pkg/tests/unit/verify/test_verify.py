"""
Unit tests for gpehom.numerics.verify: SCF oracle, half-domain reference,
invariant checks and the Jacobian finite-difference audit.
"""
import numpy as np
import pytest

from gpehom.core.models import ProblemSpec
from gpehom.numerics.discretize import build_grid
from gpehom.numerics.homotopy import initial_states
from gpehom.numerics.tracer import trace_all
from gpehom.numerics.verify import (
    CheckReport,
    Eigenpair,
    LambdaTrace,
    OracleError,
    antisymmetric_state,
    audit_residuals,
    check_antisymmetric,
    check_bound,
    check_order_preservation,
    check_path_separation,
    check_positive,
    half_domain_operator,
    jacobian_fd_audit,
    make_eigenpair,
    mirror_antisymmetric,
    scf_cross_check,
    scf_ground_state,
)


def _distance_up_to_sign(a, b):
    return min(np.linalg.norm(a - b), np.linalg.norm(a + b))


def _pair(phi, lam=1.0):
    return Eigenpair(lam=lam, phi=np.asarray(phi, dtype=float), residual=0.0)


class TestScfGroundState:
    def test_linear_limit_is_smallest_eigenpair(self, make_problem):
        p = make_problem(n=50, beta=0.0, sigma=0.5)
        ref = scf_ground_state(p)
        w, V = np.linalg.eigh(p.D.todense())
        assert ref.lam == pytest.approx(w[0], abs=1e-8)
        phi0 = V[:, 0] * np.sqrt(p.c)
        assert _distance_up_to_sign(ref.phi, phi0) <= 1e-6 * np.sqrt(p.c)

    def test_positive_and_converged(self, make_problem):
        p = make_problem(n=50, beta=5.0, sigma=0.5)
        ref = scf_ground_state(p)
        assert np.all(ref.phi > 0)
        assert ref.residual <= 1e-9
        assert ref.phi @ ref.phi == pytest.approx(p.c, rel=1e-10)
        assert "positive" in ref.flags

    def test_matches_traced_first_path(self, make_problem, trace_cfg):
        p = make_problem(n=50, beta=1.0, sigma=0.5)
        (path,) = trace_all(p, trace_cfg, [1])
        report = scf_cross_check(scf_ground_state(p), path.eigenpair)
        assert report.passed, report.message

    def test_iteration_budget(self, make_problem):
        p = make_problem(n=50, beta=5.0, sigma=0.5)
        with pytest.raises(OracleError):
            scf_ground_state(p, max_iter=1)

    def test_invalid_mixing(self, make_problem):
        with pytest.raises(ValueError):
            scf_ground_state(make_problem(n=10, beta=1.0), alpha=0.0)


class TestHalfDomainReference:
    """Antisymmetric states from the reduced left-half problem."""

    def test_half_operator_odd(self, make_problem):
        p = make_problem(n=7)
        M = half_domain_operator(p.D)
        assert M.size == 3
        assert np.allclose(M.todense(), p.D.todense()[:3, :3])

    def test_half_operator_even(self, make_problem):
        p = make_problem(n=8)
        M = half_domain_operator(p.D)
        dense = p.D.todense()
        assert M.size == 4
        assert M.diagonal()[-1] == pytest.approx(dense[3, 3] - dense[3, 4])
        assert np.allclose(M.todense()[:3, :3], dense[:3, :3])

    def test_mirror(self):
        assert np.allclose(mirror_antisymmetric(np.array([1.0, 2.0]), 5), [1, 2, 0, -2, -1])
        assert np.allclose(mirror_antisymmetric(np.array([1.0, 2.0]), 4), [1, 2, -2, -1])

    @pytest.mark.parametrize("n", [7, 8])
    def test_matches_traced_second_path(self, make_problem, trace_cfg, n):
        p = make_problem(n=n, beta=1.0, sigma=0.1)
        (path,) = trace_all(p, trace_cfg, [2])
        assert path.success, path.message
        ref = antisymmetric_state(p, tol=1e-11)
        assert ref.lam == pytest.approx(path.lam, abs=1e-8)
        assert _distance_up_to_sign(ref.phi, path.eigenpair.phi) <= 1e-8 * np.linalg.norm(ref.phi)
        assert check_antisymmetric(ref, p.grid).passed

    def test_requires_symmetric_interval(self, make_problem):
        p = make_problem(n=7, domain=(0.0, 4.0))
        with pytest.raises(ValueError):
            antisymmetric_state(p)


class TestSymmetryChecks:
    def test_antisymmetric_vector_passes(self):
        grid = build_grid(ProblemSpec(dim=1, domain=(-2.0, 2.0), n=5))
        report = check_antisymmetric(_pair([1.0, 2.0, 0.0, -2.0, -1.0]), grid)
        assert report.passed and report.applicable
        assert report.details["first_half_one_signed"]

    def test_symmetric_vector_fails(self):
        grid = build_grid(ProblemSpec(dim=1, domain=(-2.0, 2.0), n=5))
        assert not check_antisymmetric(_pair([1.0, 2.0, 3.0, 2.0, 1.0]), grid).passed

    def test_not_applicable_in_2d(self):
        grid = build_grid(ProblemSpec(dim=2, domain=(-1.0, 1.0, -1.0, 1.0), m=3, n=3))
        report = check_antisymmetric(_pair(np.ones(9)), grid)
        assert not report.applicable and report.passed

    def test_not_applicable_on_shifted_interval(self):
        grid = build_grid(ProblemSpec(dim=1, domain=(0.0, 4.0), n=5))
        assert not check_antisymmetric(_pair([1.0, 2.0, 0.0, -2.0, -1.0]), grid).applicable

    def test_positivity(self):
        assert check_positive(_pair([0.1, 0.5, 0.2])).passed
        assert check_positive(_pair([-0.1, -0.5, -0.2])).passed
        assert not check_positive(_pair([0.1, 0.0, 0.2])).passed
        assert not check_positive(_pair([0.1, -0.5, 0.2])).passed


class TestTraceChecks:
    """Bound, ordering and separation on sampled lam(t)."""

    def test_bound(self, make_problem):
        p = make_problem(n=10, beta=1.0, sigma=0.5)
        inside = LambdaTrace(1, np.array([0.0, 1.0]), np.array([0.0, 0.5 * p.lambda_bound]))
        outside = LambdaTrace(1, np.array([0.0, 1.0]), np.array([0.0, 2.0 * p.lambda_bound]))
        assert check_bound(inside, p).passed
        assert not check_bound(outside, p).passed

    def test_linear_bound(self, make_problem):
        p = make_problem(n=10, beta=0.0, sigma=0.5)
        assert p.lambda_bound == pytest.approx(p.rho_A + p.rho_D)

    def test_interpolation(self):
        trace = LambdaTrace(1, np.array([0.0, 0.5, 0.8]), np.array([1.0, 2.0, 4.0]))
        values = trace.at([0.0, 0.25, 0.6, 1.0])
        assert np.allclose(values[:3], [1.0, 1.5, 2.0 + 2.0 / 3.0])
        assert np.isnan(values[3])

    def test_order_preserved(self):
        t = np.linspace(0.0, 1.0, 11)
        traces = [LambdaTrace(k, t, k + t) for k in (1, 2, 3)]
        report = check_order_preservation(traces)
        assert report.passed and not report.hard

    def test_order_violation(self):
        t = np.array([0.0, 1.0])
        traces = [LambdaTrace(1, t, np.array([0.0, 2.0])), LambdaTrace(2, t, np.array([1.0, 0.0]))]
        report = check_order_preservation(traces)
        assert not report.passed
        assert report.details["violations"]
        assert 0.0 not in report.details["violations"]

    def test_single_path_trivially_ordered(self):
        assert check_order_preservation([LambdaTrace(1, np.array([0.0, 1.0]), np.array([0.0, 1.0]))]).passed

    def test_touching_paths_fail_separation(self):
        t = np.array([0.0, 1.0])
        traces = [LambdaTrace(1, t, np.array([0.0, 2.0])), LambdaTrace(2, t, np.array([1.0, 1.0]))]
        report = check_path_separation(traces)
        assert not report.passed
        assert report.details["at_t"] == pytest.approx(0.5)

    def test_separated_paths(self):
        t = np.linspace(0.0, 1.0, 5)
        traces = [LambdaTrace(1, t, t), LambdaTrace(2, t, t + 1.0)]
        assert check_path_separation(traces).passed


class TestResidualAudit:
    def test_traced_pairs_pass_and_tampered_fail(self, make_problem, trace_cfg):
        p = make_problem(n=20, beta=1.0, sigma=0.5)
        pairs = {r.index: r.eigenpair for r in trace_all(p, trace_cfg, [1, 2])}
        assert audit_residuals(p, pairs, trace_cfg.newton_tol).passed

        phi = pairs[2].phi.copy()
        phi[3] = 0.0
        pairs[2] = make_eigenpair(p, phi, pairs[2].lam)
        report = audit_residuals(p, pairs, trace_cfg.newton_tol)
        assert not report.passed
        assert report.details["failed"] == [2]

    def test_make_eigenpair_recomputes_residual(self, make_problem):
        p = make_problem(n=5, beta=1.0)
        (s,) = initial_states(p, [1])
        e = make_eigenpair(p, s.phi, s.lam)
        assert e.residual > 0
        assert e.with_flags("x", "x").flags == ("x",)

    def test_check_report_dict(self):
        report = CheckReport.not_applicable("antisymmetry", "n/a", hard=False)
        assert report.as_dict() == {"name": "antisymmetry", "passed": True, "applicable": False,
                                    "hard": False, "message": "n/a", "details": {}}


class TestJacobianAudit:
    def test_linear_problem(self, make_problem):
        assert jacobian_fd_audit(make_problem(n=20, beta=0.0, sigma=0.5), samples=20) <= 1e-8

    def test_1d_cubic_problem(self, make_problem):
        assert jacobian_fd_audit(make_problem(n=20, beta=1.0, sigma=0.5), samples=100) <= 1e-6

    def test_2d_cubic_problem(self, make_problem):
        p = make_problem(m=8, n=8, beta=1.0, sigma=1.0)
        assert jacobian_fd_audit(p, samples=100) <= 1e-6

    def test_directional_mode(self, make_problem):
        p = make_problem(n=20, beta=1.0, sigma=0.5)
        assert jacobian_fd_audit(p, samples=10, full_coordinate_limit=5) <= 1e-6
