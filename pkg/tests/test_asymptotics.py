from fractions import Fraction

import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from kphoton.asymptotics import (
    AnsatzSeries,
    DivisionByNonUnit,
    ExponentBranch,
    OutOfScope,
    QuadraticRoot,
    RingElem,
    UnsolvableLevel,
    assemble_final_quadratic,
    brute_force_exponent_oracle,
    c0_closed,
    c_recursion,
    crho_closed,
    gamma_root_elements,
    gf_coefficient,
    rho_quadratic_general,
    ring_sqrt,
    solve_levels,
    substitute_ansatz,
)
from kphoton.weyl import ParamPoly, build_reduced_operator

W = ParamPoly.omega()
E = ParamPoly.energy()


def G(p, k, coeff=1):
    return RingElem.gamma(p, k).scale(coeff)


def levels_for(k, depth=5):
    return substitute_ansatz(build_reduced_operator(k), k, depth)


class TestRingElem:
    def test_quotient_reduction_is_eager(self):
        x = RingElem.gamma(7, 5)
        assert x.terms == {(2, 0, 0, ()): ParamPoly.rational(-1)}
        assert RingElem.gamma(5, 5) == RingElem.one(5).scale(-1)
        assert RingElem.gamma(10, 5) == RingElem.one(5)

    def test_negative_powers_fold(self):
        # g^-1 = -g^(k-1)
        x = RingElem({(-1, 0, 0, ()): ParamPoly.rational(1)}, 3)
        assert x == G(2, 3, -1)

    def test_gamma_is_unit(self):
        one = RingElem.one(4)
        g = RingElem.gamma(1, 4)
        assert one.div_unit(g) * g == one

    def test_div_non_unit_rejected(self):
        x = RingElem.one(3) + RingElem.gamma(1, 3)
        with pytest.raises(DivisionByNonUnit):
            RingElem.one(3).div_unit(x)

    def test_subs_and_views(self):
        k = 5
        b = RingElem({(0, 1, 0, ()): ParamPoly.rational(1)}, k)
        expr = b * b.scale(3) + RingElem.gamma(2, k)
        assert expr.max_b() == 2
        val = G(3, k)
        got = expr.subs_b(val)
        assert got == val * val * RingElem.one(k).scale(3) + RingElem.gamma(2, k)

    def test_linear_in_c(self):
        k = 3
        c2 = RingElem.c_sym(2, k)
        expr = c2 * G(1, k, 4) + RingElem.one(k).scale(7)
        K, R = expr.linear_in_c(2)
        assert K == G(1, k, 4) and R == RingElem.one(k).scale(7)

    def test_rem_rho_quadratic(self):
        # r^2 + 3r + 2 kills r = -1 and r = -2
        k = 5
        r = RingElem({(0, 0, 1, ()): ParamPoly.rational(1)}, k)
        q = r * r + r.scale(3) + RingElem.one(k).scale(2)
        assert (q * q + q.scale(5)).rem_rho_quadratic(
            ParamPoly.rational(3), ParamPoly.rational(2)).is_zero()
        assert not q.rem_rho_quadratic(ParamPoly.rational(3),
                                       ParamPoly.rational(1)).is_zero()

    @settings(max_examples=40, deadline=None)
    @given(st.integers(0, 6), st.integers(0, 6), st.integers(0, 6),
           st.integers(-3, 3), st.integers(-3, 3))
    def test_mul_commutes_and_reduces(self, p1, p2, p3, q1, q2):
        k = 4
        a = G(p1, k, q1) + G(p2, k, 3)
        b = G(p3, k, q2) + RingElem.one(k)
        assert a * b == b * a
        assert all(key[0] < k for key in (a * b).terms)

    def test_mixed_moduli_rejected(self):
        with pytest.raises(ValueError):
            RingElem.one(3) + RingElem.one(4)
        with pytest.raises(ValueError):
            RingElem.one() * RingElem.one(4)

    def test_text(self):
        k = 3
        e = G(1, k, Fraction(9)) + RingElem({(2, 0, 0, ()): W * W}, k)
        assert e.text() == "9*g1 + w^2*g2"
        b2 = RingElem({(1, 2, 0, ()): ParamPoly.rational(9)}, k)
        assert b2.text() == "9*g1*b^2"


class TestRingSqrt:
    def test_k3_beta_square(self):
        # b^2 = -(w^2/9) g  ->  b = (w/3) g^2
        k = 3
        rhs = RingElem({(1, 0, 0, ()): (W * W).scale(Fraction(-1, 9))}, k)
        root = ring_sqrt(rhs)
        assert root == RingElem({(2, 0, 0, ()): W.scale(Fraction(1, 3))}, k)
        assert root * root == rhs

    def test_zero_and_failures(self):
        assert ring_sqrt(RingElem.zero(5)).is_zero()
        assert ring_sqrt(RingElem.one(5).scale(2)) is None       # sqrt(2) not rational
        assert ring_sqrt(RingElem.one(4) + RingElem.gamma(1, 4)) is None

    @pytest.mark.parametrize("k", [3, 5, 7])
    def test_odd_k_squares_roundtrip(self, k):
        # even g-power: positive coefficient is a square; odd g-power: the
        # sign flip from g^k = -1 means only the negative one is
        for p in range(k):
            coeff = Fraction(4, 9) if p % 2 == 0 else Fraction(-4, 9)
            x = G(p, k, coeff)
            root = ring_sqrt(x)
            assert root is not None and root * root == x
            assert ring_sqrt(G(p, k, -coeff)) is None


class TestQuadraticRoot:
    def test_rho4_normal_form(self):
        b = ParamPoly.rational(5)
        c = (W * W).scale(Fraction(1, 16)) + ParamPoly.rational(Fraction(21, 4))
        plus, minus = QuadraticRoot.pair_from_monic(b, c)
        assert plus.rational == ParamPoly.rational(Fraction(-5, 2))
        assert plus.surd == ParamPoly.rational(Fraction(1, 4))
        assert minus.surd == ParamPoly.rational(Fraction(-1, 4))
        assert plus.disc == ParamPoly.rational(16) - W * W
        assert plus.verify() and minus.verify()
        assert not plus.is_rational()

    def test_perfect_square_disc_gives_rationals(self):
        plus, minus = QuadraticRoot.pair_from_monic(ParamPoly.rational(7),
                                                    ParamPoly.rational(10))
        assert plus.is_rational() and plus.rational_value().constant_value() == -2
        assert minus.rational_value().constant_value() == -5

    def test_double_root(self):
        roots = QuadraticRoot.pair_from_monic(ParamPoly.rational(4),
                                              ParamPoly.rational(4))
        assert len(roots) == 1 and roots[0].rational_value().constant_value() == -2

    @settings(max_examples=60, deadline=None)
    @given(st.fractions(min_value=-50, max_value=50, max_denominator=8),
           st.fractions(min_value=-50, max_value=50, max_denominator=8))
    def test_back_substitution_property(self, b, c):
        for root in QuadraticRoot.pair_from_monic(ParamPoly.rational(b),
                                                  ParamPoly.rational(c)):
            assert root.verify()


class TestAnsatzSeries:
    def test_derivative_rule_single_term(self):
        s = AnsatzSeries.initial(5)
        d = s.deriv()
        # c_0 at offset 0 -> g c_0 at +1, b c_0 at 0, r c_0 at -1
        assert d.coeff_at_offset(1) == RingElem({(1, 0, 0, (0,)): ParamPoly.rational(1)})
        b_term = d.coeff_at_offset(0)
        assert (0, 1, 0, (0,)) in b_term.terms
        r_term = d.coeff_at_offset(-1)
        assert (0, 0, 1, (0,)) in r_term.terms
        # offset -1 starts as c_1; the r-part of its derivative at -2 is (r-1)c_1
        dm2 = d.coeff_at_offset(-2)
        assert dm2.terms[(0, 0, 0, (1,))] == ParamPoly.rational(-1)

    def test_window_truncation(self):
        s = AnsatzSeries.initial(5)
        for _ in range(3):
            s = s.deriv()
        assert s.s == 3 and len(s.terms) == 6
        assert s.coeff_at_offset(-3).is_zero()  # fell out of the window


class TestSubstituteAnsatz:
    def test_depth_guards(self):
        op = build_reduced_operator(3)
        with pytest.raises(ValueError):
            substitute_ansatz(op, 3, 4)
        with pytest.raises(ValueError):
            substitute_ansatz(op, 3, 33)
        substitute_ansatz(op, 3, 20, cap=20)

    def test_k5_level0_shows_double_root_factor(self):
        levels = levels_for(5)
        expected = RingElem({(10, 0, 0, (0,)): ParamPoly.rational(1),
                             (5, 0, 0, (0,)): ParamPoly.rational(2),
                             (0, 0, 0, (0,)): ParamPoly.rational(1)})
        # the engine's sign convention carries an overall -1 unit
        assert levels[0].coeff == -expected

    @pytest.mark.parametrize("k", range(3, 13))
    def test_level0_factorization(self, k):
        lvl0 = levels_for(k)[0].coeff
        expected = RingElem({(2 * k, 0, 0, (0,)): ParamPoly.rational(-1),
                             (k, 0, 0, (0,)): ParamPoly.rational(-2),
                             (0, 0, 0, (0,)): ParamPoly.rational(-1)})
        assert lvl0 == expected

    @pytest.mark.parametrize("k", range(3, 13))
    def test_level1_vanishes_in_quotient(self, k):
        levels = levels_for(k)
        assert not levels[1].coeff.is_zero()          # raw: multiple of g^k+1
        assert levels[1].coeff.reduce(k).is_zero()

    @pytest.mark.parametrize("k", range(5, 13))
    def test_level3_vanishes_with_beta_zero(self, k):
        levels = levels_for(k)
        lvl3 = levels[3].coeff.reduce(k).subs_b(RingElem.zero(k))
        assert lvl3.is_zero()

    def test_levels_are_linear_in_c(self):
        for k in (3, 4, 6):
            for lv in levels_for(k):
                for n in lv.coeff.c_indices():
                    lv.coeff.linear_in_c(n)   # raises if any c appears squared


class TestSolveLevels:
    def test_k2_out_of_scope(self):
        levels = substitute_ansatz(build_reduced_operator(2), 2, 5)
        with pytest.raises(OutOfScope):
            solve_levels(levels, 2)

    def test_needs_depth_5(self):
        with pytest.raises(ValueError):
            solve_levels(levels_for(3)[:4], 3)

    def test_k3_branches(self):
        branches = solve_levels(levels_for(3), 3)
        assert len(branches) == 6
        assert [b.gamma_index for b in branches] == [0, 0, 1, 1, 2, 2]
        assert all(b.gamma_multiplicity == 2 for b in branches)
        # every branch: rho = -2 exactly
        for b in branches:
            assert b.rho.is_rational()
            assert b.rho.rational_value().constant_value() == -2
        # beta = +-(w/3) g^2 instantiated per root; for the root gamma = -1
        # (index m=1) this is +-w/3
        w3 = RingElem.from_param(W.scale(Fraction(1, 3)), 3)
        assert branches[2].beta == w3
        assert branches[3].beta == -w3
        # beta pairs are opposite on every root
        for i in range(0, 6, 2):
            assert branches[i].beta == -branches[i + 1].beta

    def test_k3_beta_inverse_relation(self):
        # beta = +-w/(3 gamma): multiplying by 3*gamma must give +-w
        branches = solve_levels(levels_for(3), 3)
        for b in branches:
            prod = b.beta * b.gamma.scale(3)
            assert prod.is_scalar()
            assert prod.scalar_part() in (W, -W)

    def test_k3_gamma_roots(self):
        roots = gamma_root_elements(3)
        assert roots[0] == RingElem.gamma(1, 3)
        assert roots[1] == RingElem.one(3).scale(-1)
        assert roots[2] == RingElem.gamma(2, 3).scale(-1)
        # each satisfies g^3 = -1
        for r in roots:
            assert r * r * r == RingElem.one(3).scale(-1)

    def test_k4_branches(self):
        branches = solve_levels(levels_for(4), 4)
        assert len(branches) == 8
        for b in branches:
            assert b.beta.is_zero()
            assert b.rho.monic_b == ParamPoly.rational(5)
            assert b.rho.monic_c == (W * W).scale(Fraction(1, 16)) + ParamPoly.rational(Fraction(21, 4))
            assert b.rho.disc == ParamPoly.rational(16) - W * W
        assert branches[0].rho.surd == ParamPoly.rational(Fraction(1, 4))
        assert branches[1].rho.surd == ParamPoly.rational(Fraction(-1, 4))

    @pytest.mark.parametrize("k", range(5, 13))
    def test_general_k(self, k):
        branches = solve_levels(levels_for(k), k)
        assert len(branches) == 2 * k
        gb, gc = rho_quadratic_general(k)
        for b in branches:
            assert b.beta.is_zero()
            assert b.rho.monic_b == ParamPoly.rational(gb)
            assert b.rho.monic_c == ParamPoly.rational(gc)
            assert b.rho.is_rational()
        vals = {b.rho.rational_value().constant_value() for b in branches}
        assert vals == {Fraction(1 - k, 2), Fraction(5 - 3 * k, 2)}
        assert all(v < Fraction(-1, 2) for v in vals)

    @pytest.mark.parametrize("k", [3, 5, 6])
    def test_branches_annihilate_levels_0_to_4(self, k):
        levels = levels_for(k)
        for b in solve_levels(levels, k):
            assert all(b.annihilates(lv) for lv in levels[:5])

    def test_k4_branches_annihilate_via_quadratic(self):
        levels = levels_for(4)
        for b in solve_levels(levels, 4):
            assert all(b.annihilates(lv) for lv in levels[:5])

    @pytest.mark.parametrize("k", range(5, 13))
    def test_exponents_free_of_parameters(self, k):
        for b in solve_levels(levels_for(k), k):
            for poly in (b.rho.monic_b, b.rho.monic_c, b.rho.rational):
                for name in ("w", "d", "E"):
                    assert not poly.uses(name)
            assert b.beta.is_zero()


class TestCRecursion:
    def test_k5_plus_branch_frozen_tail(self):
        levels = levels_for(5, 11)
        br = solve_levels(levels, 5)[0]      # m=0, rho=-2
        ext = c_recursion(br, levels, 5)
        k = 5
        assert ext.c[1].is_zero()
        expected_c2 = (G(2, k).scale(W.scale(Fraction(-1, 10)))
                       + G(4, k).scale(ParamPoly.rational(Fraction(-3, 2))
                                       + (W * W).scale(Fraction(-1, 50))))
        assert ext.c[2] == expected_c2
        assert ext.c[3].is_zero() and ext.resonant == (3,)
        assert ext.c[5].is_zero()
        assert ext.c[4].uses_param("E")     # tail picks up the spectral parameter

    def test_k5_minus_branch_frozen_tail(self):
        levels = levels_for(5, 11)
        br = solve_levels(levels, 5)[1]      # m=0, rho=-5
        ext = c_recursion(br, levels, 5)
        k = 5
        expected_c2 = (G(2, k).scale(W.scale(Fraction(1, 50)))
                       + G(4, k).scale(ParamPoly.rational(Fraction(-15, 2))
                                       + (W * W).scale(Fraction(1, 250))))
        assert ext.c[2] == expected_c2
        assert ext.c[3].is_zero() and ext.resonant == ()   # solved, not pinned
        assert ext.c[5].is_zero()

    @pytest.mark.parametrize("idx", [0, 1])
    def test_k5_back_substitution(self, idx):
        levels = levels_for(5, 11)
        ext = c_recursion(solve_levels(levels, 5)[idx], levels, 5)
        # every level up to 4 + n_max vanishes on the extended branch
        assert all(ext.annihilates(lv) for lv in levels[:10])

    def test_k3_frozen_c1_and_laurent_c2(self):
        levels = levels_for(3, 9)
        branches = solve_levels(levels, 3)
        br = branches[1]                     # m=0, beta = -w g^2/3 = +w/(3g)
        expected_c1 = (RingElem.one(3).scale(Fraction(1, 2))
                       + G(1, 3).scale(W.scale(Fraction(1, 6)) - E.scale(Fraction(1, 3))
                                       + (W * W * W).scale(Fraction(1, 81))))
        assert br.c[1] == expected_c1
        ext = c_recursion(br, levels, 3)
        # c_2 needs 1/w: the coefficient field ParamPoly is Laurent
        assert any(e[0] < 0 for key, p in ext.c[2].terms.items() for e in p.terms)
        assert all(ext.annihilates(lv) for lv in levels[:7])

    def test_k4_surd_rho_refused(self):
        levels = levels_for(4, 7)
        br = solve_levels(levels, 4)[0]
        with pytest.raises(ValueError, match="rational rho"):
            c_recursion(br, levels, 1)

    def test_depth_precondition(self):
        levels = levels_for(5, 6)
        br = solve_levels(levels, 5)[0]
        with pytest.raises(ValueError, match="depth"):
            c_recursion(br, levels, 3)

    def test_n_zero_is_identity(self):
        levels = levels_for(5)
        br = solve_levels(levels, 5)[0]
        assert c_recursion(br, levels, 0).c == br.c


class TestClosedForms:
    def test_rho_quadratic_general(self):
        assert rho_quadratic_general(5) == (Fraction(7), Fraction(10))
        b6, c6 = rho_quadratic_general(6)
        # roots -5/2 and -13/2
        assert Fraction(-5, 2) ** 2 + b6 * Fraction(-5, 2) + c6 == 0
        assert Fraction(-13, 2) ** 2 + b6 * Fraction(-13, 2) + c6 == 0
        with pytest.raises(ValueError):
            rho_quadratic_general(4)

    @pytest.mark.parametrize("k", range(5, 13))
    def test_discriminant_is_k_minus_2_squared(self, k):
        b, c = rho_quadratic_general(k)
        assert b * b - 4 * c == (k - 2) ** 2

    def test_c0_closed(self):
        assert c0_closed(4) == 3
        assert c0_closed(6) == 45
        assert c0_closed(3) == 0

    def test_gf_matches_closed_form(self):
        assert gf_coefficient(4) == 3
        assert gf_coefficient(6) == 45
        for m in range(4, 25):
            assert gf_coefficient(m) == c0_closed(m)
        with pytest.raises(ValueError):
            gf_coefficient(3)

    def test_crho_closed_values(self):
        assert crho_closed(5) == (45, 315, 10, 20)
        with pytest.raises(ValueError):
            crho_closed(4)


class TestBruteForceOracle:
    def test_m4_fixture(self):
        # d^4 e^(g z^2/2) = (3 g^2 + 6 g^3 z^2 + g^4 z^4) e^(g z^2/2) at r=0
        t = brute_force_exponent_oracle(4)
        assert t[(2, 0, 0)] == 3
        assert t[(3, 0, 2)] == 6
        assert t[(4, 0, 4)] == 1

    def test_m10_fixtures(self):
        t = brute_force_exponent_oracle(10)
        assert t[(8, 2, 6)] == 45           # k=5 coefficient of g^8 r^2 z^6
        assert t[(9, 1, 8)] == 10

    def test_cost_guard(self):
        with pytest.raises(ValueError):
            brute_force_exponent_oracle(25)

    @pytest.mark.parametrize("k", range(5, 11))
    def test_reproduces_crho_closed(self, k):
        c2k_r2, c2k_r, ck_r2, ck_r = crho_closed(k)
        t2k = brute_force_exponent_oracle(2 * k)
        tk = brute_force_exponent_oracle(k)
        assert t2k[(2 * k - 2, 2, 2 * k - 4)] == c2k_r2
        assert t2k[(2 * k - 2, 1, 2 * k - 4)] == c2k_r
        assert tk[(k - 2, 2, k - 4)] == ck_r2
        assert tk[(k - 2, 1, k - 4)] == ck_r

    @pytest.mark.parametrize("k", range(5, 11))
    def test_c0_slot_matches_gf(self, k):
        t2k = brute_force_exponent_oracle(2 * k)
        assert t2k[(2 * k - 2, 0, 2 * k - 4)] == gf_coefficient(2 * k)


class TestFinalAssembly:
    @pytest.mark.parametrize("k", range(5, 13))
    def test_assembly_reproduces_final_quadratic(self, k):
        assert assemble_final_quadratic(k) == rho_quadratic_general(k)

    @pytest.mark.parametrize("k", range(5, 11))
    def test_assembly_from_oracle_route(self, k):
        assert assemble_final_quadratic(k, from_oracle=True) == rho_quadratic_general(k)

    def test_rejects_small_k(self):
        with pytest.raises(ValueError):
            assemble_final_quadratic(4)
