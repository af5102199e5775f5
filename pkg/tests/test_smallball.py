import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from ssrmlab.ensemble import EntryDistribution, RngStream
from ssrmlab.errors import CapabilityError, ParameterError
from ssrmlab.smallball import (
    DiscreteLaw,
    decoupling_consequence_check,
    law_of_masked_entry,
    lcd_smallball_bound,
    levy_concentration_scalar,
    levy_concentration_vector,
    matrix_bracket_log,
    paley_zygmund_check,
    rlcd_smallball_bound,
    tensorization_check,
)
from ssrmlab.structure import StructureConstants

RAD = EntryDistribution.rademacher()


def _levy_exact_oracle(values, probs, eps):
    """Independent enumeration: best open window over a finite law.

    For eps > 0 the optimum is attained by anchoring the window at an
    atom, [a, a + 2 eps); at eps = 0 it is the largest atom mass.
    """
    values = np.asarray(values, dtype=np.float64)
    probs = np.asarray(probs, dtype=np.float64)
    if eps == 0.0:
        return float(probs.max())
    best = 0.0
    for a in values:
        mass = probs[(values >= a) & (values < a + 2 * eps)].sum()
        best = max(best, float(mass))
    return best


def _samples_from_law(values, weights):
    """Sample multiset realizing exact rational frequencies."""
    out = []
    for v, w in zip(values, weights):
        out.extend([v] * w)
    return np.asarray(out, dtype=np.float64)


class TestLevyScalar:
    def test_constant_samples_any_eps(self):
        xs = np.zeros(100)
        for eps in (0.0, 0.3, 2.0):
            assert levy_concentration_scalar(xs, eps).value == 1.0

    def test_rademacher_exact_half(self):
        xs = _samples_from_law([-1.0, 1.0], [500, 500])
        assert levy_concentration_scalar(xs, 0.5).value == 0.5

    def test_masked_rademacher_three_atoms(self):
        # delta*xi at p = 1/2: atoms (-1, 0, 1) with masses (1/4, 1/2, 1/4);
        # the best open window of width 1 captures only the atom at 0.
        xs = _samples_from_law([-1.0, 0.0, 1.0], [25, 50, 25])
        assert levy_concentration_scalar(xs, 0.5).value == 0.5

    def test_matches_enumeration_oracle(self):
        rng = np.random.default_rng(31)
        for _ in range(25):
            k = int(rng.integers(2, 6))
            values = np.sort(rng.normal(size=k))
            weights = rng.integers(1, 30, size=k)
            xs = _samples_from_law(values, weights)
            probs = weights / weights.sum()
            for eps in (0.0, 0.1, 0.5, 1.3):
                got = levy_concentration_scalar(xs, eps).value
                want = _levy_exact_oracle(values, probs, eps)
                assert got == pytest.approx(want, abs=1e-12)

    @settings(max_examples=30, deadline=None)
    @given(seed=st.integers(0, 10_000))
    def test_monotone_in_eps(self, seed):
        rng = np.random.default_rng(seed)
        xs = rng.normal(size=200)
        values = [levy_concentration_scalar(xs, e).value for e in (0.0, 0.1, 0.2, 0.5, 1.0)]
        assert values == sorted(values)

    def test_empty_rejected(self):
        with pytest.raises(ParameterError):
            levy_concentration_scalar([], 0.1)

    def test_ci_shrinks(self):
        small = levy_concentration_scalar(np.zeros(100), 0.1)
        large = levy_concentration_scalar(np.zeros(10_000), 0.1)
        assert large.ci_halfwidth < small.ci_halfwidth


class TestLevyVector:
    def test_identical_samples(self):
        pts = np.ones((50, 3))
        for eps in (0.0, 0.5):
            assert levy_concentration_vector(pts, eps).value == 1.0

    def test_gaussian_pairs_small_ball(self):
        # Ball of radius 0.1 in the plane holds mass <= 1 - exp(-eps^2/2)
        # ~ 0.005 at the best center; the estimate must stay under 0.01.
        rng = RngStream(32, 0).generator()
        pts = rng.standard_normal((100_000, 2))
        est = levy_concentration_vector(pts, 0.1)
        assert est.value <= 0.01

    def test_dimension_mismatch(self):
        with pytest.raises(ParameterError):
            levy_concentration_vector(np.ones((10, 2)), 0.1, centers=np.ones((3, 5)))

    def test_monotone_in_eps(self):
        rng = RngStream(33, 0).generator()
        pts = rng.standard_normal((2000, 3))
        vals = [levy_concentration_vector(pts, e).value for e in (0.1, 0.3, 0.6, 1.0)]
        assert vals == sorted(vals)

    def test_dimension_one_matches_scalar(self):
        rng = RngStream(34, 0).generator()
        xs = rng.standard_normal(500)
        vec = levy_concentration_vector(xs[:, None], 0.2)
        sca = levy_concentration_scalar(xs, 0.2)
        assert vec.value == sca.value


class TestBoundBrackets:
    def test_lcd_bracket_limits(self):
        e1 = np.zeros(4)
        e1[0] = 1.0
        assert lcd_smallball_bound(e1, 1.0, 0.5, 0.0, math.inf) == 0.0
        assert lcd_smallball_bound(e1, 1.0, 0.25, 0.1, 20.0) == pytest.approx(0.2, abs=1e-15)

    def test_lcd_bracket_monotone(self):
        e1 = np.zeros(4)
        e1[0] = 1.0
        base = lcd_smallball_bound(e1, 1.0, 0.5, 0.1, 10.0)
        assert lcd_smallball_bound(e1, 1.0, 0.5, 0.2, 10.0) >= base
        assert lcd_smallball_bound(e1, 1.0, 0.5, 0.1, 20.0) <= base

    def test_rlcd_bracket_arithmetic(self):
        consts = StructureConstants(lam=0.01)
        e1 = np.zeros(4)
        e1[0] = 1.0
        got = rlcd_smallball_bound(e1, consts, 1.0, 0.1, 100.0)
        assert got == pytest.approx(1.01, abs=1e-12)
        assert rlcd_smallball_bound(e1, consts, 1.0, 0.0, math.inf) == 0.0

    def test_matrix_bracket_log_matches_direct_power(self):
        # Log-space form vs direct exponentiation where the latter is finite.
        val = matrix_bracket_log(0.5, 10, 0.1)
        assert math.exp(val) == pytest.approx(0.5 ** (10 - 1.0), rel=1e-12)
        # Huge exponent: direct power would underflow to 0; log form stays finite.
        big = matrix_bracket_log(0.5, 10_000, 0.01)
        assert math.isfinite(big)
        assert big == pytest.approx((10_000 - 100) * math.log(0.5), rel=1e-12)

    def test_validation(self):
        e1 = np.zeros(2)
        e1[0] = 1.0
        with pytest.raises(ParameterError):
            lcd_smallball_bound(e1, 1.0, 0.0, 0.1, 10.0)
        with pytest.raises(ParameterError):
            rlcd_smallball_bound(e1, StructureConstants(), 0.5, 0.1, 0.0)


class TestPaleyZygmund:
    def test_uniform_on_zero_two(self):
        law = DiscreteLaw(np.array([0.0, 2.0]), np.array([0.5, 0.5]))
        # P(xi > 0.5) = 0.5 >= (1 - 0.5)^2 / 2 = 0.125
        assert paley_zygmund_check(law, 0.5)

    def test_theta_one_trivial(self):
        law = DiscreteLaw(np.array([0.0, 2.0]), np.array([0.5, 0.5]))
        assert paley_zygmund_check(law, 1.0)

    def test_constant_one(self):
        law = DiscreteLaw(np.array([1.0]), np.array([1.0]))
        assert paley_zygmund_check(law, 0.5)

    @settings(max_examples=50, deadline=None)
    @given(seed=st.integers(0, 100_000), theta=st.floats(0.0, 1.0))
    def test_always_true_on_random_laws(self, seed, theta):
        # It is a theorem; a False return would flag an implementation bug.
        rng = np.random.default_rng(seed)
        k = int(rng.integers(2, 7))
        values = np.abs(rng.normal(size=k)) + 0.01
        probs = rng.dirichlet(np.ones(k))
        assert paley_zygmund_check(DiscreteLaw(values, probs), theta)

    def test_continuous_law_rejected(self):
        with pytest.raises(CapabilityError):
            paley_zygmund_check(EntryDistribution.standard_gaussian(), 0.5)

    def test_squared_entry_law(self):
        # Applied to xi^2 for the masked rademacher entry, as callers do.
        law = law_of_masked_entry(RAD, 0.5).transform(lambda v: v * v)
        assert paley_zygmund_check(law, 0.5)

    def test_nonpositive_mean_rejected(self):
        law = DiscreteLaw(np.array([-1.0, 1.0]), np.array([0.5, 0.5]))
        with pytest.raises(ParameterError):
            paley_zygmund_check(law, 0.5)


class TestTensorization:
    def test_n_one_coincides(self):
        sampler = lambda rng, size: rng.standard_normal(size)
        rep = tensorization_check(sampler, 1, 0.3, 5000, RngStream(35, 0))
        assert rep.vector_estimate.value == rep.coordinate_estimate.value

    def test_point_mass_tight(self):
        sampler = lambda rng, size: np.zeros(size)
        rep = tensorization_check(sampler, 4, 0.3, 2000, RngStream(35, 1))
        assert rep.coordinate_estimate.value == 1.0
        assert rep.vector_estimate.value == 1.0
        assert rep.c_hat == pytest.approx(1.0, abs=1e-12)

    def test_gaussian_constant_stable_across_eps(self):
        sampler = lambda rng, size: rng.standard_normal(size)
        cs = []
        for k, eps in enumerate((0.2, 0.3, 0.4)):
            rep = tensorization_check(sampler, 4, eps, 50_000, RngStream(36, k))
            cs.append(rep.c_hat)
        mid = cs[1]
        assert all(abs(c - mid) <= 0.25 * mid for c in cs)


class TestDecoupling:
    def test_zero_matrix(self):
        check = decoupling_consequence_check(np.zeros((3, 3)), [0], RAD, 0.5, 2000, RngStream(37, 0))
        assert check.lhs.value == 1.0
        assert check.rhs.value == 1.0
        assert check.holds

    def test_diagonal_exact_case(self):
        # G = diag(1,1), J = {0}: the quadratic form is identically 2 and
        # the decoupled bilinear form identically 0, so both sides are
        # exactly 1 and the inequality holds with zero slack.  Verified
        # here by exact enumeration of the 16 sign patterns.
        G = np.eye(2)
        lhs_atoms = []
        rhs_atoms = []
        for x1 in (-1, 1):
            for x2 in (-1, 1):
                lhs_atoms.append(x1 * x1 + x2 * x2)
                for xp2 in (-1, 1):
                    rhs_atoms.append((x2 - xp2) * 0.0 * x1)
        assert _levy_exact_oracle([2.0], [1.0], 0.5) == 1.0
        assert set(lhs_atoms) == {2}
        assert set(rhs_atoms) == {0.0}
        check = decoupling_consequence_check(G, [0], RAD, 0.5, 4096, RngStream(37, 1))
        assert check.lhs.value == 1.0
        assert check.rhs.value == 1.0
        assert check.lhs.value**2 <= check.rhs.value  # zero slack needed

    def test_random_configurations_hold(self):
        rng = np.random.default_rng(38)
        for t in range(20):
            G = rng.standard_normal((6, 6)) * (rng.random((6, 6)) < 0.5)
            G = np.triu(G) + np.triu(G, 1).T
            size = int(rng.integers(1, 6))
            J = rng.choice(6, size=size, replace=False).tolist()
            check = decoupling_consequence_check(G, J, RAD, 0.75, 4000, RngStream(39, t))
            assert check.holds

    def test_validation(self):
        with pytest.raises(ParameterError):
            decoupling_consequence_check(np.eye(3), [], RAD, 0.5, 100, RngStream(0, 0))
        with pytest.raises(ParameterError):
            decoupling_consequence_check(np.eye(3), [0, 1, 2], RAD, 0.5, 100, RngStream(0, 0))
        with pytest.raises(ParameterError):
            decoupling_consequence_check(np.array([[0.0, 1.0], [0.0, 0.0]]), [0], RAD, 0.5, 100, RngStream(0, 0))


class TestMaskedEntryLaw:
    def test_three_atoms_at_half(self):
        law = law_of_masked_entry(RAD, 0.5)
        assert np.allclose(law.values, [-1.0, 0.0, 1.0])
        assert np.allclose(law.probs, [0.25, 0.5, 0.25])

    def test_exact_concentration_matches_remark_shape(self):
        # L(delta xi, 0.5) = 1 - p for the masked rademacher law.
        for p in (0.3, 0.5, 0.8):
            law = law_of_masked_entry(RAD, p)
            assert _levy_exact_oracle(law.values, law.probs, 0.5) == pytest.approx(
                max(1 - p, p / 2), abs=1e-12
            )

    def test_continuous_rejected(self):
        with pytest.raises(CapabilityError):
            law_of_masked_entry(EntryDistribution.standard_gaussian(), 0.5)
