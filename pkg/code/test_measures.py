import math
from fractions import Fraction

import numpy as np
import pytest
from numpy.testing import assert_allclose

from measures import (
    ConvergenceError,
    Coupling,
    DiscreteMeasure,
    FlowNetwork,
    MeanSpec,
    StepRepresentation,
    UpperSetCertificate,
    brute_force_stochastic_leq,
    check_directsum_coupling,
    check_stochastic_monotone,
    compose_couplings,
    coupled_direct_sum,
    couplings_sample,
    harmonic_mean,
    lift_mean,
    mean_of_measure,
    monotone_representation,
    order_pool_agreement,
    power_mean,
    random_measure,
    rationalize_weights,
    solve_power_mean,
    stochastic_leq,
)
from numlin import (
    DimensionError,
    NotPSDError,
    lambda_min,
    loewner_leq,
    opnorm,
    random_pd,
    random_psd,
    weighted_geometric_mean,
)
from verify import SuiteConfig


def two_point(a: np.ndarray, b: np.ndarray, p: float = 0.5) -> DiscreteMeasure:
    return DiscreteMeasure((a, b), np.array([p, 1.0 - p]))


class TestDiscreteMeasure:
    def test_validation(self):
        with pytest.raises(ValueError):
            DiscreteMeasure((np.eye(2),), np.array([0.5]))
        with pytest.raises(ValueError):
            DiscreteMeasure((np.eye(2), np.eye(2)), np.array([1.0, 0.0]))
        with pytest.raises(DimensionError):
            DiscreteMeasure((np.eye(2), np.eye(3)), np.array([0.5, 0.5]))
        with pytest.raises(NotPSDError):
            DiscreteMeasure.dirac(np.diag([1.0, 0.0]))

    def test_canonical_merges_duplicates(self):
        a, b = np.eye(2), 2.0 * np.eye(2)
        mu = DiscreteMeasure((a, b, a), np.array([0.25, 0.5, 0.25]))
        canon = mu.canonical()
        assert canon.size == 2
        assert sorted(canon.weights) == pytest.approx([0.5, 0.5])

    def test_canonical_ignores_order(self):
        mu = random_measure(3, 2, seed=1)
        shuffled = mu.permute([2, 0, 1])
        for a, b in zip(mu.canonical().atoms, shuffled.canonical().atoms):
            assert np.array_equal(a, b)

    def test_split(self):
        mu = DiscreteMeasure.uniform([np.eye(2), 3.0 * np.eye(2)])
        split = mu.split(1, parts=3)
        assert split.size == 4
        assert_allclose(split.weights, [0.5, 1 / 6, 1 / 6, 1 / 6])

    @pytest.mark.parametrize("parts", [3, 5, 7])
    def test_split_pieces_sum_back_exactly(self, parts):
        mu = random_measure(3, 2, seed=parts)
        split = mu.split(1, parts=parts)
        assert math.fsum(split.weights[1:1 + parts]) == mu.weights[1]
        assert np.array_equal(split.canonical().weights, mu.canonical().weights)

    def test_bad_permutation(self):
        with pytest.raises(ValueError):
            random_measure(3, 2, seed=2).permute([0, 0, 1])


class TestCoupling:
    def test_product(self):
        mu = random_measure(2, 2, seed=3)
        nu = random_measure(3, 2, seed=4)
        c = Coupling.product(mu, nu)
        assert_allclose(c.gamma.sum(axis=1), mu.weights)
        assert len(c.support()) == 6

    def test_marginal_mismatch(self):
        with pytest.raises(ValueError):
            Coupling(np.array([[0.5, 0.0], [0.0, 0.4]]), np.array([0.5, 0.5]), np.array([0.5, 0.5]))

    def test_compose(self):
        mu = random_measure(2, 1, seed=5)
        nu = random_measure(3, 1, seed=6)
        rho = random_measure(2, 1, seed=7)
        glued = compose_couplings(Coupling.product(mu, nu), Coupling.product(nu, rho))
        assert_allclose(glued.gamma, np.outer(mu.weights, rho.weights), atol=1e-14)

    def test_compose_needs_shared_marginal(self):
        mu, nu = random_measure(2, 1, seed=8), random_measure(3, 1, seed=9)
        with pytest.raises(DimensionError):
            compose_couplings(Coupling.product(mu, nu), Coupling.product(mu, nu))

    def test_samples_are_couplings(self):
        mu, nu = random_measure(3, 2, seed=10), random_measure(4, 2, seed=11)
        sample = couplings_sample(mu, nu, 6, seed=0)
        assert len(sample) == 6
        assert_allclose(sample[0].gamma, np.outer(mu.weights, nu.weights))
        for c in sample[1:]:
            assert_allclose(c.gamma.sum(axis=0), nu.weights, atol=1e-12)
            # A northwest-corner fill has at most a + b - 1 cells.
            assert len(c.support()) <= mu.size + nu.size - 1

    def test_coupled_direct_sum(self):
        mu = DiscreteMeasure.dirac(np.eye(1))
        nu = DiscreteMeasure.uniform([2.0 * np.eye(2), 3.0 * np.eye(2)])
        joint = coupled_direct_sum(mu, nu, Coupling.product(mu, nu))
        assert joint.n == 3
        assert_allclose(joint.atoms[1], np.diag([1.0, 3.0, 3.0]))


class TestFlowNetwork:
    def test_simple_network(self):
        net = FlowNetwork(4)
        net.add_edge(0, 1, 1.0)
        net.add_edge(0, 2, 2.0)
        net.add_edge(1, 3, 2.0)
        net.add_edge(2, 3, 0.5)
        assert net.max_flow(0, 3) == pytest.approx(1.5)
        assert net.reachable(0) == {0, 2}

    def test_self_loop(self):
        with pytest.raises(ValueError):
            FlowNetwork(2).add_edge(1, 1, 1.0)


class TestStochasticOrder:
    def test_dirac_scalar_order(self):
        ordered, coupling = stochastic_leq(DiscreteMeasure.dirac(np.eye(2)), DiscreteMeasure.dirac(2 * np.eye(2)))
        assert ordered
        assert_allclose(coupling.gamma, [[1.0]])

    def test_reversed_dirac(self):
        ordered, cert = stochastic_leq(DiscreteMeasure.dirac(2 * np.eye(2)), DiscreteMeasure.dirac(np.eye(2)))
        assert not ordered
        assert cert.mu_mass > cert.nu_mass

    def test_incomparable_atoms(self):
        mu = DiscreteMeasure.dirac(np.diag([2.0, 0.5]))
        nu = DiscreteMeasure.dirac(np.eye(2))
        ordered, cert = stochastic_leq(mu, nu)
        assert not ordered
        assert isinstance(cert, UpperSetCertificate)
        assert cert.mu_indices == (0,)
        assert cert.nu_indices == ()
        assert cert.mu_mass == 1.0 and cert.nu_mass == 0.0

    def test_reflexive(self):
        mu = random_measure(4, 3, seed=12)
        ordered, coupling = stochastic_leq(mu, mu)
        assert ordered
        assert_allclose(coupling.gamma.sum(axis=1), mu.weights, atol=1e-12)

    def test_mass_must_move_up(self):
        a, b, c = np.eye(1), 2.0 * np.eye(1), 3.0 * np.eye(1)
        assert stochastic_leq(two_point(a, b), two_point(b, c))[0]
        assert not stochastic_leq(two_point(a, c, 0.25), two_point(b, c, 0.75))[0]
        assert stochastic_leq(two_point(a, c, 0.75), two_point(b, c, 0.25))[0]

    @pytest.mark.parametrize("seed", range(4))
    def test_transitive_through_composed_coupling(self, seed):
        mu = random_measure(3, 2, seed=seed)
        nu = DiscreteMeasure(tuple(a + np.eye(2) for a in mu.atoms), mu.weights).permute([2, 0, 1])
        rho = DiscreteMeasure(tuple(a + random_psd(2, seed=seed + j) for j, a in enumerate(nu.atoms)), nu.weights)
        ok_first, first = stochastic_leq(mu, nu)
        ok_second, second = stochastic_leq(nu, rho)
        assert ok_first and ok_second
        glued = compose_couplings(first, second)
        for i, j in glued.support():
            assert loewner_leq(mu.atoms[i], rho.atoms[j])
        assert stochastic_leq(mu, rho)[0]

    def test_dimension_mismatch(self):
        with pytest.raises(DimensionError):
            stochastic_leq(DiscreteMeasure.dirac(np.eye(2)), DiscreteMeasure.dirac(np.eye(3)))

    def test_certificate_masses(self):
        mu = two_point(np.eye(1), 3.0 * np.eye(1), 0.25)
        nu = two_point(2.0 * np.eye(1), 3.0 * np.eye(1), 0.75)
        ordered, cert = stochastic_leq(mu, nu)
        assert not ordered
        assert cert.mu_mass - cert.nu_mass == pytest.approx(0.5)

    @pytest.mark.parametrize("seed", range(8))
    def test_agrees_with_brute_force(self, seed):
        rng = np.random.default_rng(seed)
        base = random_measure(3, 2, (0.5, 2.0), rng)
        raised = DiscreteMeasure(tuple(a + random_psd(2, scale=rng.uniform(0.0, 2.0), seed=rng) for a in base.atoms),
                                 base.weights)
        other = random_measure(2, 2, (0.5, 2.0), rng)
        pool = [base, raised, other, DiscreteMeasure.dirac(0.1 * np.eye(2)), DiscreteMeasure.dirac(10.0 * np.eye(2))]
        assert order_pool_agreement(pool) == []

    def test_brute_force_size_limit(self):
        big = random_measure(11, 1, seed=1)
        with pytest.raises(ValueError):
            brute_force_stochastic_leq(big, big)


class TestMonotoneRepresentation:
    def test_lengths_match_coupling(self):
        a, b, c = np.eye(1), 2.0 * np.eye(1), 3.0 * np.eye(1)
        mu, nu = two_point(a, b, 0.4), two_point(b, c, 0.4)
        ordered, coupling = stochastic_leq(mu, nu)
        assert ordered
        xi_mu, xi_nu = monotone_representation(mu, nu, coupling)
        assert_allclose(xi_mu.pushforward_weights(2), mu.weights, atol=1e-12)
        assert_allclose(xi_nu.pushforward_weights(2), nu.weights, atol=1e-12)
        for i, j in zip(xi_mu.indices, xi_nu.indices):
            assert lambda_min(nu.atoms[j] - mu.atoms[i]) >= 0

    def test_rejects_unordered_coupling(self):
        mu = DiscreteMeasure.dirac(3.0 * np.eye(1))
        nu = DiscreteMeasure.dirac(np.eye(1))
        with pytest.raises(ValueError):
            monotone_representation(mu, nu, Coupling.product(mu, nu))

    def test_value_index(self):
        step = StepRepresentation(np.array([0.0, 0.25, 1.0]), (1, 0))
        assert step.value_index(0.0) == 1
        assert step.value_index(0.5) == 0
        assert step.value_index(1.0) == 0
        with pytest.raises(ValueError):
            step.value_index(1.5)

    def test_bad_breakpoints(self):
        with pytest.raises(ValueError):
            StepRepresentation(np.array([0.0, 0.5, 0.4, 1.0]), (0, 1, 2))
        with pytest.raises(ValueError):
            StepRepresentation(np.array([0.0, 0.5]), (0,))

    def test_lift_mean_is_mean_of_pushforward(self):
        atoms = [random_pd(2, seed=1), random_pd(2, seed=2)]
        step = StepRepresentation(np.array([0.0, 0.3, 0.5, 1.0]), (0, 1, 0))
        expected = mean_of_measure(MeanSpec("harmonic"), DiscreteMeasure(tuple(atoms), np.array([0.8, 0.2])))
        assert_allclose(lift_mean(MeanSpec("harmonic"), step, atoms), expected, atol=1e-12)


class TestMeans:
    def test_spec_parse(self):
        assert MeanSpec.parse("power:0.5") == MeanSpec("power", 0.5)
        assert MeanSpec.parse("harmonic").family == "harmonic"
        assert str(MeanSpec("power", 0.25)) == "power:0.25"
        for bad in ("power", "power:0", "power:1.5", "geometric", "harmonic:2"):
            with pytest.raises(ValueError):
                MeanSpec.parse(bad)

    def test_power_one_is_arithmetic(self):
        mu = random_measure(3, 3, seed=13)
        result = solve_power_mean(mu.weights, mu.atoms, 1.0)
        assert result.iterations == 0
        assert_allclose(result.mean, sum(w * a for w, a in zip(mu.weights, mu.atoms)), atol=1e-14)

    def test_commuting_atoms(self):
        a, b = np.diag([1.0, 4.0]), np.diag([9.0, 1.0])
        for t in (0.25, 0.5, 0.9):
            got = power_mean([0.5, 0.5], [a, b], t)
            expected = np.diag([(0.5 + 0.5 * 9.0 ** t) ** (1 / t), (0.5 * 4.0 ** t + 0.5) ** (1 / t)])
            assert_allclose(got, expected, rtol=1e-9)

    def test_dirac(self):
        a = random_pd(3, seed=14)
        assert_allclose(power_mean([1.0], [a], 0.5), a, atol=1e-10 * opnorm(a))

    @pytest.mark.parametrize("seed", range(5))
    def test_fixed_point_residual(self, seed):
        mu = random_measure(3, 3, seed=seed)
        result = solve_power_mean(mu.weights, mu.atoms, 0.5)
        x = result.mean
        image = sum(w * weighted_geometric_mean(x, a, 0.5) for w, a in zip(mu.weights, mu.atoms))
        assert opnorm(image - x) / opnorm(x) <= 1e-10

    def test_between_harmonic_and_arithmetic(self):
        mu = random_measure(3, 3, seed=20)
        arith = mean_of_measure(MeanSpec("arithmetic"), mu)
        harm = mean_of_measure(MeanSpec("harmonic"), mu)
        middle = mean_of_measure(MeanSpec("power", 0.5), mu)
        assert lambda_min(arith - middle) >= -1e-9
        assert lambda_min(middle - harm) >= -1e-9

    def test_harmonic(self):
        assert_allclose(harmonic_mean([0.5, 0.5], [np.eye(1), 3.0 * np.eye(1)]), [[1.5]])

    def test_permutation_and_split_invariance(self):
        mu = random_measure(3, 2, seed=21)
        spec = MeanSpec("power", 0.5)
        base = mean_of_measure(spec, mu)
        assert np.array_equal(mean_of_measure(spec, mu.permute([1, 2, 0])), base)
        assert np.array_equal(mean_of_measure(spec, mu.split(0, parts=4)), base)

    @pytest.mark.parametrize("parts", [3, 5, 7])
    @pytest.mark.parametrize("seed", range(6))
    def test_split_invariance_is_exact(self, seed, parts):
        mu = random_measure(3, 2, seed=seed)
        spec = MeanSpec("power", 0.5)
        assert np.array_equal(mean_of_measure(spec, mu.split(seed % 3, parts=parts)), mean_of_measure(spec, mu))

    @pytest.mark.parametrize("c", [0.1, 3.0, 250.0])
    def test_homogeneity(self, c):
        mu = random_measure(3, 3, seed=23)
        scaled = [c * a for a in mu.atoms]
        base = harmonic_mean(mu.weights, mu.atoms)
        assert_allclose(harmonic_mean(mu.weights, scaled), c * base, atol=1e-12 * c * opnorm(base))
        base = power_mean(mu.weights, mu.atoms, 0.5)
        assert_allclose(power_mean(mu.weights, scaled, 0.5), c * base, atol=1e-9 * c * opnorm(base))
        a, b = mu.atoms[:2]
        base = weighted_geometric_mean(a, b, 0.3)
        assert_allclose(weighted_geometric_mean(c * a, c * b, 0.3), c * base, atol=1e-12 * c * opnorm(base))

    @pytest.mark.parametrize("spec", ["harmonic", "power:0.25", "power:0.5", "arithmetic"])
    def test_raising_one_atom_raises_the_mean(self, spec):
        mu = random_measure(3, 3, seed=24)
        atoms = list(mu.atoms)
        atoms[0] = atoms[0] + random_psd(3, seed=25)
        raised = DiscreteMeasure(tuple(atoms), mu.weights)
        spec = MeanSpec.parse(spec)
        assert loewner_leq(mean_of_measure(spec, mu), mean_of_measure(spec, raised), 1e-9)

    def test_non_convergence(self):
        mu = random_measure(3, 3, seed=22)
        with pytest.raises(ConvergenceError) as info:
            solve_power_mean(mu.weights, mu.atoms, 0.5, max_iter=1)
        assert info.value.iterations == 1
        assert isinstance(info.value, RuntimeError)

    def test_bad_weights(self):
        with pytest.raises(ValueError):
            power_mean([0.5, 0.6], [np.eye(1), np.eye(1)], 0.5)
        with pytest.raises(DimensionError):
            power_mean([1.0], [np.eye(1), np.eye(1)], 0.5)


class TestMeanProperties:
    @pytest.mark.parametrize("spec", ["arithmetic", "harmonic", "power:0.5"])
    def test_stochastic_monotone(self, spec):
        cfg = SuiteConfig(dims=(2, 3), trials=5, seed=1)
        assert check_stochastic_monotone(MeanSpec.parse(spec), cfg).passed

    def test_non_monotone_mean_is_caught(self):
        def inverse_arithmetic(mu: DiscreteMeasure) -> np.ndarray:
            return np.linalg.inv(sum(w * a for w, a in zip(mu.weights, mu.atoms)))

        cfg = SuiteConfig(dims=(2,), trials=10, seed=0)
        assert not check_stochastic_monotone(inverse_arithmetic, cfg).passed

    @pytest.mark.parametrize("spec", ["arithmetic", "harmonic", "power:0.5"])
    def test_direct_sum_coupling(self, spec):
        mu, nu = random_measure(2, 2, seed=30), random_measure(3, 1, seed=31)
        report = check_directsum_coupling(MeanSpec.parse(spec), mu, nu, couplings_sample(mu, nu, 4, seed=2))
        assert report.passed
        assert report.trials == 4

    def test_direct_sum_needs_couplings(self):
        mu = random_measure(2, 1, seed=1)
        with pytest.raises(ValueError):
            check_directsum_coupling(MeanSpec("arithmetic"), mu, mu, [])


class TestRationalize:
    def test_sums_to_one(self):
        fracs = rationalize_weights([0.1, 0.2, 0.7])
        assert sum(fracs) == 1
        assert fracs[0] == Fraction(1, 10)

    def test_bounded_denominator(self):
        fracs = rationalize_weights([1 / 3, 2 / 3], max_denominator=10)
        assert fracs == [Fraction(1, 3), Fraction(2, 3)]
