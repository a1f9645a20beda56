import numpy as np
import pytest
from numpy.testing import assert_allclose

import verify
from builders import cauchy_atom, weighted_harmonic
from numlin import MatrixTuple, NotPSDError, opnorm, random_pd, random_pd_tuple, random_unitary
from pencil import OutsideDomainError, evaluate, identity_realization
from verify import (
    SUITES,
    CertificateError,
    DecompositionCertificate,
    SuiteConfig,
    VerificationReport,
    check_herglotz,
    check_hypograph_saturation,
    check_scalar_monotone,
    comat_decompose,
    run_suite,
    run_trials,
    structured_hypograph_point,
)

FAST = SuiteConfig(dims=(2, 3), trials=8, seed=3)


class TestSuiteConfig:
    def test_defaults(self):
        cfg = SuiteConfig()
        assert cfg.dims == (2, 3, 5)
        assert cfg.trials == 50
        assert cfg.interval == (0.1, 10.0)

    @pytest.mark.parametrize(
        "kwargs", [{"dims": ()}, {"dims": (0,)}, {"trials": 0}, {"tol": 0.0}, {"interval": (2.0, 1.0)}]
    )
    def test_rejects(self, kwargs):
        with pytest.raises(ValueError):
            SuiteConfig(**kwargs)


class TestRunTrials:
    def test_seeds_follow_trial_index(self):
        seen = []

        def trial(n, rng):
            seen.append(n)
            return 0.0

        report = run_trials("probe", SuiteConfig(dims=(1, 4), trials=3, seed=10), trial)
        assert seen == [1, 1, 1, 4, 4, 4]
        assert report.passed
        assert report.worst_violation == 0.0

    def test_failures_and_first_seed(self):
        violations = iter([0.0, -1e-3, -0.5, 1e-9])
        report = run_trials("probe", SuiteConfig(dims=(2,), trials=4, seed=100),
                            lambda n, rng: next(violations))
        assert report.failures == 2
        assert report.first_failing_seed == 101
        assert report.worst_violation == -0.5
        assert not report.passed

    def test_skips(self):
        def trial(n, rng):
            if n == 1:
                raise OutsideDomainError("outside")
            return None

        report = run_trials("probe", SuiteConfig(dims=(1, 2), trials=2), trial)
        assert report.skipped == 4
        assert report.failures == 0

    def test_report_dict(self):
        report = VerificationReport(suite="monotone", dims=(2,), trials=5, seed=1, tol=1e-8)
        d = report.to_dict()
        assert d["pass"] is True
        assert d["first_failing_seed"] is None
        assert d["version"] == 1


class TestSuitesOnRealizations:
    @pytest.mark.parametrize("suite", sorted(SUITES))
    def test_identity_passes(self, suite):
        assert run_suite(suite, identity_realization(), FAST).passed

    @pytest.mark.parametrize("suite", ["axioms", "monotone", "concave", "jensen", "herglotz"])
    def test_harmonic_passes(self, suite):
        assert run_suite(suite, weighted_harmonic([0.3, 0.7]), FAST).passed

    @pytest.mark.parametrize("suite", sorted(SUITES))
    def test_cauchy_passes(self, suite):
        assert run_suite(suite, cauchy_atom(2.0), FAST).passed

    def test_deterministic(self):
        a = run_suite("concave", cauchy_atom(1.0), FAST)
        b = run_suite("concave", cauchy_atom(1.0), FAST)
        assert a.to_dict() == b.to_dict()

    def test_unknown_suite(self):
        with pytest.raises(ValueError):
            run_suite("convex", identity_realization(), FAST)

    def test_herglotz_identity_worst_is_nonnegative(self):
        assert check_herglotz(identity_realization(), FAST).worst_violation >= -1e-12

    def test_complex_unitary_covariance(self):
        r = cauchy_atom(2.0)
        x = random_pd_tuple(1, 3, seed=5)
        u = random_unitary(3, 6, complex_=True)
        assert_allclose(evaluate(r, x.conjugate(u)), u.conj().T @ evaluate(r, x) @ u, atol=1e-12)

    def test_herglotz_symmetry_has_its_own_tolerance(self, monkeypatch):
        # F(Z*) drifts from F(Z)* by 1e-7 while Im F stays positive.
        def skewed(r, z):
            return z[0] + 1e-7 * np.triu(np.ones(z[0].shape), 1)

        monkeypatch.setattr(verify, "evaluate_complex", skewed)
        cfg = SuiteConfig(dims=(2, 3), trials=4, seed=0, tol=1e-5)
        report = check_herglotz(identity_realization(), cfg)
        assert not report.passed
        assert report.failures == 8


class TestScalarTargets:
    def test_square_is_not_monotone(self):
        cfg = SuiteConfig(dims=(2, 3), trials=30, seed=0)
        report = check_scalar_monotone(lambda x: x ** 2, 1, cfg)
        assert not report.passed
        assert report.first_failing_seed is not None

    def test_sqrt_is_monotone(self):
        assert check_scalar_monotone(np.sqrt, 1, FAST).passed

    def test_square_fails_hypograph(self):
        cfg = SuiteConfig(dims=(2, 3), trials=30, seed=0)
        assert not check_hypograph_saturation(lambda x: x ** 2, cfg, k=1).passed

    def test_two_variable_geometric_mean_saturates(self):
        report = check_hypograph_saturation(lambda x, y: np.sqrt(x * y), FAST, k=2)
        assert report.passed

    def test_scalar_target_needs_arity(self):
        with pytest.raises(ValueError):
            check_hypograph_saturation(np.sqrt, FAST)


class TestStructuredHypographPoint:
    @pytest.mark.parametrize("k", [1, 2, 3])
    def test_compression_commutes(self, k):
        rng = np.random.default_rng(k)
        x, v = structured_hypograph_point(k, 3, 6, (0.1, 10.0), rng)
        assert x.commuting
        assert v.shape == (6, 3)
        assert_allclose(v.T @ v, np.eye(3), atol=1e-12)
        compressed = x.compress(v)
        for a in compressed:
            for b in compressed:
                assert opnorm(a @ b - b @ a) <= 1e-10


class TestHullDecomposition:
    def test_scalar_tuple_is_one_term(self):
        x = MatrixTuple((2.0 * np.eye(3), 5.0 * np.eye(3)))
        cert = comat_decompose(x)
        assert cert.sizes == (3,)
        assert_allclose(cert.isometry, np.eye(3))
        assert_allclose(cert.tuples, [[2.0, 5.0]])
        cert.check(x)

    def test_single_matrix(self):
        a = np.diag([1.0, 3.0])
        cert = comat_decompose(MatrixTuple((a,)))
        assert cert.k == 1
        assert sorted(cert.tuples[:, 0]) == pytest.approx([1.0, 3.0])
        cert.check(MatrixTuple((a,)))

    @pytest.mark.parametrize("seed", range(10))
    def test_random_tuples(self, seed):
        rng = np.random.default_rng(seed)
        x = random_pd_tuple(int(rng.integers(1, 4)), int(rng.integers(1, 5)), seed=rng)
        cert = comat_decompose(x)
        cert.check(x)
        res = cert.residuals(x)
        assert res["isometry"] <= 1e-12
        assert res["min_entry"] > 0
        assert cert.weights.sum() == pytest.approx(1.0)

    def test_equal_tuples_are_merged(self):
        # Both coordinates share one eigenvalue, so repeated scalar tuples appear.
        x = MatrixTuple((np.diag([1.0, 1.0, 2.0]), np.diag([3.0, 3.0, 3.0])))
        cert = comat_decompose(x)
        assert max(cert.sizes) >= 2
        cert.check(x)

    @pytest.mark.parametrize("k", [1, 2])
    def test_complex_hermitian_tuples(self, k):
        u = random_unitary(3, k, complex_=True)
        x = MatrixTuple(tuple(u.conj().T @ random_pd(3, seed=10 * k + i) @ u for i in range(k)))
        cert = comat_decompose(x)
        res = cert.residuals(x)
        assert res["isometry"] <= 1e-12
        assert res["reconstruction"] <= 1e-10 * max(opnorm(m) for m in x)
        cert.check(x)

    def test_rejects_singular(self):
        with pytest.raises(NotPSDError):
            comat_decompose(MatrixTuple((np.diag([1.0, 0.0]),)))

    def test_check_detects_tampering(self):
        x = MatrixTuple((random_pd(3, seed=4), random_pd(3, seed=5)))
        cert = comat_decompose(x)
        bad = DecompositionCertificate(isometry=cert.isometry, tuples=cert.tuples * 1.01,
                                       sizes=cert.sizes, z=cert.z)
        with pytest.raises(CertificateError):
            bad.check(x)
