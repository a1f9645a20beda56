import numpy as np
import pytest
from numpy.testing import assert_allclose

from builders import (
    DEFAULT_NODES,
    FunctionSpec,
    QuadratureScheme,
    affine,
    arrowhead_sum,
    cauchy_atom,
    geometric_mean,
    loewner_quadrature,
    parallel_sum_atom,
    power_quadrature,
    sqrt_realization,
    weighted_arithmetic,
    weighted_harmonic,
)
from numlin import DimensionError, MatrixTuple, apply_scalar_function, opnorm, random_pd, weighted_geometric_mean
from pencil import evaluate


def scalar_point(*values: float) -> MatrixTuple:
    return MatrixTuple(tuple(np.array([[v]]) for v in values))


class TestQuadrature:
    def test_sqrt_accuracy_on_interval(self):
        x = np.logspace(-2, 2, 41)
        assert_allclose(power_quadrature(0.5).scalar(x), np.sqrt(x), rtol=1e-6)

    @pytest.mark.parametrize("t", [0.3, 0.8])
    def test_power_accuracy_on_interval(self, t):
        x = np.logspace(-2, 2, 41)
        assert_allclose(power_quadrature(t).scalar(x), x ** t, rtol=1e-4)

    def test_node_count_and_order(self):
        scheme = power_quadrature(0.5, nodes=17)
        assert scheme.size == 17
        assert np.all(np.diff(scheme.nodes) > 0)
        assert np.all(scheme.weights > 0)

    def test_more_nodes_do_not_hurt(self):
        x = np.logspace(-2, 2, 21)
        coarse = np.max(np.abs(power_quadrature(0.5, 16).scalar(x) / x ** 0.5 - 1))
        fine = np.max(np.abs(power_quadrature(0.5, 64).scalar(x) / x ** 0.5 - 1))
        assert fine <= coarse

    @pytest.mark.parametrize("t", [0.0, 1.0, -0.5])
    def test_exponent_range(self, t):
        with pytest.raises(ValueError):
            power_quadrature(t)

    def test_too_few_nodes(self):
        with pytest.raises(ValueError):
            power_quadrature(0.5, nodes=4)

    def test_scheme_validation(self):
        with pytest.raises(ValueError):
            QuadratureScheme(nodes=np.array([2.0, 1.0]), weights=np.array([1.0, 1.0]))
        with pytest.raises(ValueError):
            QuadratureScheme(nodes=np.array([1.0]), weights=np.array([0.0]))


class TestAtoms:
    def test_cauchy_layout(self):
        r = cauchy_atom(2.0)
        assert_allclose(r.a0, [[0.0, 0.0], [0.0, 2.0]])
        assert_allclose(r.coeffs[0], [[1.0, 1.0], [1.0, 1.0]])
        assert_allclose(r.e, [1.0, 0.0])

    @pytest.mark.parametrize("constant_pivot", [False, True])
    @pytest.mark.parametrize("balanced", [False, True])
    def test_cauchy_value(self, constant_pivot, balanced):
        r = cauchy_atom(1.0, weight=2.0, constant_pivot=constant_pivot, balanced=balanced)
        assert evaluate(r, np.array([[1.0]]))[0, 0] == pytest.approx(1.0)

    def test_cauchy_matrix(self):
        a = random_pd(4, seed=1)
        expected = apply_scalar_function(lambda x: 3.0 * x / (3.0 + x), a)
        assert_allclose(evaluate(cauchy_atom(3.0), a), expected, atol=1e-10)

    def test_cauchy_in_second_variable(self):
        r = cauchy_atom(1.0, k=2, variable=1)
        assert evaluate(r, scalar_point(5.0, 1.0))[0, 0] == pytest.approx(0.5)

    def test_parallel_sum(self):
        # (2 X1) : (X2) at (1, 2) = 2 * 2 / 4
        r = parallel_sum_atom([0.0, 2.0, 0.0], [0.0, 0.0, 1.0])
        assert evaluate(r, scalar_point(1.0, 2.0))[0, 0] == pytest.approx(1.0)

    def test_invalid_atoms(self):
        with pytest.raises(ValueError):
            cauchy_atom(0.0)
        with pytest.raises(DimensionError):
            cauchy_atom(1.0, k=1, variable=1)
        with pytest.raises(ValueError):
            parallel_sum_atom([1.0, -1.0], [0.0, 1.0])


class TestArrowhead:
    def test_two_atoms(self):
        r = arrowhead_sum([cauchy_atom(1.0), cauchy_atom(2.0)])
        assert r.m == 3
        assert evaluate(r, np.array([[1.0]]))[0, 0] == pytest.approx(0.5 + 2.0 / 3.0)

    def test_affine_part(self):
        r = arrowhead_sum([cauchy_atom(1.0)], alpha=1.0, betas=[0.5])
        assert evaluate(r, np.array([[1.0]]))[0, 0] == pytest.approx(1.0 + 0.5 + 0.5)

    def test_sum_matches_individual_atoms(self):
        a = random_pd(3, seed=2)
        atoms = [cauchy_atom(lam, weight=w, balanced=True) for lam, w in [(0.5, 1.0), (4.0, 0.25)]]
        total = sum(evaluate(atom, a) for atom in atoms)
        assert_allclose(evaluate(arrowhead_sum(atoms), a), total, atol=1e-10)

    def test_arity_mismatch(self):
        with pytest.raises(DimensionError):
            arrowhead_sum([cauchy_atom(1.0), cauchy_atom(1.0, k=2)])

    def test_affine_builder(self):
        assert evaluate(affine(2.0, [3.0]), np.array([[1.0]]))[0, 0] == pytest.approx(5.0)
        with pytest.raises(ValueError):
            affine(-1.0, [1.0])


class TestFunctionBuilders:
    def test_sqrt_matrix(self):
        a = random_pd(4, (0.1, 10.0), seed=3)
        got = evaluate(sqrt_realization(), a)
        assert_allclose(got, apply_scalar_function(np.sqrt, a), atol=1e-6 * opnorm(a))

    def test_power_matrix(self):
        a = random_pd(3, (0.1, 10.0), seed=4)
        got = evaluate(loewner_quadrature(0.3), a)
        assert_allclose(got, apply_scalar_function(lambda x: x ** 0.3, a), atol=1e-4 * opnorm(a))

    def test_harmonic_scalars(self):
        r = weighted_harmonic([0.5, 0.5])
        assert evaluate(r, scalar_point(1.0, 3.0))[0, 0] == pytest.approx(1.5)

    def test_harmonic_matrices(self):
        a, b = random_pd(3, seed=5), random_pd(3, seed=6)
        expected = np.linalg.inv(0.25 * np.linalg.inv(a) + 0.75 * np.linalg.inv(b))
        got = evaluate(weighted_harmonic([0.25, 0.75]), MatrixTuple((a, b)))
        assert_allclose(got, expected, atol=1e-10)

    def test_arithmetic(self):
        r = weighted_arithmetic([0.2, 0.3, 0.5])
        assert evaluate(r, scalar_point(1.0, 2.0, 4.0))[0, 0] == pytest.approx(2.8)

    def test_bad_weights(self):
        with pytest.raises(ValueError):
            weighted_harmonic([0.5, 0.6])
        with pytest.raises(ValueError):
            weighted_arithmetic([1.5, -0.5])

    def test_geometric_mean_scalars(self):
        r = geometric_mean(0.5)
        assert r.k == 2
        assert evaluate(r, scalar_point(1.0, 4.0))[0, 0] == pytest.approx(2.0, rel=1e-6)

    def test_geometric_mean_commuting(self):
        x1, x2 = np.diag([1.0, 2.0]), np.diag([4.0, 0.5])
        got = evaluate(geometric_mean(0.25), MatrixTuple((x1, x2)))
        assert_allclose(got, np.diag([4.0 ** 0.25, 2.0 ** 0.75 * 0.5 ** 0.25]), rtol=1e-4)

    @pytest.mark.parametrize("seed", range(4))
    def test_geometric_mean_noncommuting(self, seed):
        rng = np.random.default_rng(seed)
        a, b = random_pd(4, (0.5, 5.0), rng), random_pd(4, (0.5, 5.0), rng)
        got = evaluate(geometric_mean(0.5, nodes=128), MatrixTuple((a, b)))
        oracle = weighted_geometric_mean(a, b, 0.5)
        assert opnorm(got - oracle) <= 1e-5 * opnorm(oracle)

    def test_geometric_mean_converges_with_nodes(self):
        a, b = random_pd(3, (0.5, 5.0), seed=7), random_pd(3, (0.5, 5.0), seed=8)
        oracle = weighted_geometric_mean(a, b, 0.5)
        errors = [
            opnorm(evaluate(geometric_mean(0.5, nodes=m), MatrixTuple((a, b))) - oracle) / opnorm(oracle)
            for m in (16, 32, 64, 128)
        ]
        for coarse, fine in zip(errors, errors[1:]):
            assert fine <= max(coarse, 1e-9)
        assert errors[-1] < errors[0]
        assert errors[-1] <= 1e-6

    @pytest.mark.parametrize("c", [0.2, 7.0])
    def test_geometric_mean_is_homogeneous(self, c):
        r = geometric_mean(0.5, nodes=32)
        a, b = random_pd(3, seed=9), random_pd(3, seed=10)
        base = evaluate(r, MatrixTuple((a, b)))
        assert_allclose(evaluate(r, MatrixTuple((c * a, c * b))), c * base, atol=1e-10 * c * opnorm(base))


class TestFunctionSpec:
    @pytest.mark.parametrize(
        "text, tag, params",
        [
            ("sqrt", "sqrt", ()),
            ("power:0.25", "power", (0.25,)),
            ("Harmonic:0.5,0.5", "harmonic", (0.5, 0.5)),
            ("identity:1,3", "identity", (1.0, 3.0)),
            ("cauchy:2", "cauchy", (2.0,)),
        ],
    )
    def test_parse(self, text, tag, params):
        spec = FunctionSpec.parse(text)
        assert spec.tag == tag
        assert spec.params == params

    @pytest.mark.parametrize(
        "text", ["cube", "power", "power:1.5", "constant:0", "harmonic:0.3,0.3", "sqrt:2", "cauchy:x"]
    )
    def test_rejects(self, text):
        with pytest.raises(ValueError):
            FunctionSpec.parse(text)

    def test_arity(self):
        assert FunctionSpec.parse("identity:1,3").arity == 3
        assert FunctionSpec.parse("affine:1,2,3").arity == 2
        assert FunctionSpec.parse("geomean:0.5").arity == 2
        assert FunctionSpec.parse("sqrt").arity == 1

    def test_str_round_trip(self):
        spec = FunctionSpec.parse("arithmetic:0.25,0.75")
        assert FunctionSpec.parse(str(spec)) == spec

    @pytest.mark.parametrize(
        "text, point",
        [
            ("identity:1,2", (2.0, 3.0)),
            ("constant:2.5", (4.0,)),
            ("affine:1,2", (3.0,)),
            ("cauchy:2", (3.0,)),
            ("harmonic:0.5,0.5", (1.0, 3.0)),
            ("arithmetic:0.5,0.5", (1.0, 3.0)),
        ],
    )
    def test_build_matches_scalar(self, text, point):
        spec = FunctionSpec.parse(text)
        got = evaluate(spec.build(), scalar_point(*point))[0, 0]
        assert got == pytest.approx(float(spec.scalar()(*point)))

    def test_quadrature_spec_uses_nodes(self):
        r = FunctionSpec.parse("power:0.5").build(nodes=32)
        assert r.m == 33
        assert FunctionSpec.parse("sqrt").build().m == DEFAULT_NODES + 1
