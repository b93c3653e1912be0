import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from ccsusy.errors import (
    PreconditionViolated,
    RankDrop,
    SingularD22,
    SingularSigma,
    SingularY,
    SymmetryViolated,
)
from ccsusy.scattering import ChannelSet, SolutionSample, channel_wavenumbers, wronskian
from ccsusy.susy import (
    CanonicalParametrization,
    FactorizationSpec,
    U0Parametrization,
    canonical_from_u0,
    canonical_from_u0_2x2,
    canonicalize,
    coefficient_matrices_u0,
    free_parameter_count,
    potential_jacobian_rank,
    sigma_from_u0,
    superpotential_canonical,
    superpotential_closed_forms,
    superpotential_from_u0,
    transform,
    transformed_jost,
    transformed_jost_solution,
    transformed_potential,
    u0_from_canonical_2x2,
    u_at_infinity,
)

RADII = np.linspace(0.0, 8.0, 200)


@pytest.fixture(scope="module")
def spec3():
    # kappa = (sqrt 21, sqrt 11, 1): strictly decreasing in user order
    return FactorizationSpec(ChannelSet((20.0, 10.0, 0.0)), -1.0)


def _perm(order):
    p = np.zeros((len(order), len(order)))
    p[list(order), list(range(len(order)))] = 1.0
    return p


class TestFactorizationSpec:
    def test_kappa(self, fig1_spec):
        np.testing.assert_allclose(fig1_spec.kappa, [math.sqrt(19.0), 3.0], rtol=0, atol=1e-15)
        assert fig1_spec.energy == -9.0

    def test_energy_must_lie_below_thresholds(self, fig_channels):
        with pytest.raises(ValueError):
            FactorizationSpec(fig_channels, 0.0)

    def test_inconsistent_kappa_list(self, fig_channels):
        with pytest.raises(ValueError):
            FactorizationSpec.from_kappa(fig_channels, [3.0, 3.0])

    def test_full_kappa_list(self, fig_channels):
        spec = FactorizationSpec.from_kappa(fig_channels, [math.sqrt(19.0), 3.0])
        assert spec.energy == pytest.approx(-9.0, abs=1e-13)


class TestParametrizationTypes:
    def test_u0_must_be_symmetric(self):
        with pytest.raises(ValueError):
            U0Parametrization([[1.0, 2.0], [2.1, 1.0]])

    def test_canonical_shapes_and_order(self):
        with pytest.raises(ValueError):
            CanonicalParametrization(1, (0, 0), [[1.0]], [[0.0]])
        with pytest.raises(ValueError):
            CanonicalParametrization(3, (0, 1), [], [])
        with pytest.raises(ValueError):
            CanonicalParametrization(2, (0, 1), np.zeros((0, 2)), [[0.0, 1.0], [2.0, 0.0]])


class TestSigma:
    def test_growing(self, fig1_spec):
        kap = fig1_spec.kappa
        s, ds = sigma_from_u0(U0Parametrization(np.diag(kap)), fig1_spec, 0.7)
        np.testing.assert_allclose(s, np.diag(np.exp(0.7 * kap)), rtol=1e-14)
        np.testing.assert_allclose(ds, np.diag(kap * np.exp(0.7 * kap)), rtol=1e-14)

    def test_decaying(self, fig1_spec):
        kap = fig1_spec.kappa
        s, _ = sigma_from_u0(U0Parametrization(-np.diag(kap)), fig1_spec, 0.7)
        np.testing.assert_allclose(s, np.diag(np.exp(-0.7 * kap)), rtol=1e-13, atol=1e-15)

    def test_origin(self, fig1_spec, fig_u0):
        s, ds = sigma_from_u0(U0Parametrization(fig_u0), fig1_spec, 0.0)
        np.testing.assert_array_equal(s, np.eye(2))
        np.testing.assert_array_equal(ds, fig_u0)


class TestSuperpotentialFromU0:
    def test_constant_for_growing(self, fig1_spec):
        kap = np.diag(fig1_spec.kappa)
        u = superpotential_from_u0(U0Parametrization(kap), fig1_spec, RADII)
        np.testing.assert_allclose(u, np.broadcast_to(kap, u.shape), atol=1e-14)

    def test_matches_canonical_route(self, fig1_spec, fig_u0):
        p = U0Parametrization(fig_u0)
        direct = superpotential_from_u0(p, fig1_spec, RADII)
        canon = superpotential_canonical(canonical_from_u0(p, fig1_spec), fig1_spec, RADII)
        np.testing.assert_allclose(direct, canon, atol=1e-12)

    def test_singular(self, fig1_spec):
        # channel 2: cosh(3r) - 2 sinh(3r) vanishes at tanh(3r) = 1/2
        root = math.atanh(0.5) / 3.0
        with pytest.raises(SingularSigma) as info:
            superpotential_from_u0(U0Parametrization(-6.0 * np.eye(2)), fig1_spec, [0.1, root])
        assert info.value.radius == pytest.approx(root)

    def test_transform_rejects_singular(self, fig1_spec):
        with pytest.raises(SingularY) as info:
            transform(fig1_spec, U0Parametrization(-6.0 * np.eye(2)))
        assert 0 < info.value.radius < 1


class TestCanonicalize:
    def test_already_canonical(self, fig1_spec):
        x0 = np.array([[0.3, -0.2], [-0.2, 0.5]])
        form = canonicalize(np.eye(2), x0, fig1_spec)
        assert form.param.rank == 2 and form.param.q0.shape == (0, 2)
        np.testing.assert_allclose(form.param.x0, x0, atol=1e-15)

    def test_rank_one_block_form(self, fig1_spec):
        q0, x0 = 0.4, 0.7
        form = canonicalize(np.array([[1.0, 0.0], [q0, 0.0]]), np.array([[x0, -q0], [0.0, 1.0]]), fig1_spec)
        assert form.param.rank == 1 and form.param.order == (0, 1)
        assert form.param.q0[0, 0] == pytest.approx(q0, abs=1e-15)
        assert form.param.x0[0, 0] == pytest.approx(x0, abs=1e-15)

    def test_dependent_rows(self, fig1_spec):
        form = canonicalize(np.ones((2, 2)), np.eye(2), fig1_spec)
        assert form.param.rank == 1
        assert form.param.q0[0, 0] == pytest.approx(1.0, abs=1e-15)

    def test_symmetry_violation(self, fig1_spec):
        with pytest.raises(SymmetryViolated):
            canonicalize(np.eye(2), np.array([[0.0, 1.0], [0.0, 0.0]]), fig1_spec)

    def test_singular_d22(self, fig1_spec):
        with pytest.raises(SingularD22):
            canonicalize(np.array([[1.0, 0.0], [0.0, 0.0]]), np.zeros((2, 2)), fig1_spec)

    def test_block_forms_after_right_multiplication(self, presets):
        p, _ = presets["fig3"]
        c2, d2 = coefficient_matrices_u0(U0Parametrization(p.u0), p.spec)
        form = canonicalize(c2, d2, p.spec)
        q0, x0 = form.param.q0, form.param.x0
        np.testing.assert_allclose(form.c @ form.t, [[1, 0], [q0[0, 0], 0]], atol=1e-12)
        np.testing.assert_allclose(form.d @ form.t, [[x0[0, 0], -q0[0, 0]], [0, 1]], atol=1e-12)

    @pytest.mark.parametrize("name", ["fig1", "fig2", "fig3"])
    def test_idempotent(self, presets, name):
        p, _ = presets[name]
        c2, d2 = coefficient_matrices_u0(U0Parametrization(p.u0), p.spec)
        form = canonicalize(c2, d2, p.spec)
        back = _perm(form.param.order)
        again = canonicalize(back @ form.c @ form.t, back @ form.d @ form.t, p.spec).param
        assert again.rank == form.param.rank and again.order == form.param.order
        np.testing.assert_allclose(again.q0, form.param.q0, rtol=0, atol=1e-14)
        np.testing.assert_allclose(again.x0, form.param.x0, rtol=1e-13, atol=1e-14)

    def test_greedy_order_prefers_high_threshold(self):
        spec = FactorizationSpec(ChannelSet((0.0, 10.0)), -4.0)
        k1, k2 = spec.kappa
        # det(kappa + U0) = 0 makes C2 rank one; the higher-threshold channel is picked first
        u0 = np.array([[-1.0, 1.0], [1.0, 1.0 / (k1 - 1.0) - k2]])
        form = canonicalize(*coefficient_matrices_u0(U0Parametrization(u0), spec), spec)
        assert form.param.rank == 1
        assert form.param.order == (1, 0)

    def test_vanishing_rule_enforced(self, fig1_spec):
        # channel 2 (kappa = 3) growing, channel 1 (kappa = sqrt 19) decaying
        bad = CanonicalParametrization(1, (1, 0), [[0.5]], [[0.0]])
        with pytest.raises(PreconditionViolated):
            transform(fig1_spec, bad)
        ok = CanonicalParametrization(1, (1, 0), [[0.0]], [[0.2]])
        np.testing.assert_allclose(transform(fig1_spec, ok).u_at_infinity, np.diag([-math.sqrt(19.0), 3.0]))


class TestSuperpotentialCanonical:
    def test_full_rank_zero_x0(self, spec3):
        p = CanonicalParametrization(3, (0, 1, 2), np.zeros((0, 3)), np.zeros((3, 3)))
        u = superpotential_canonical(p, spec3, RADII)
        np.testing.assert_allclose(u, np.broadcast_to(np.diag(spec3.kappa), u.shape), atol=1e-14)

    def test_full_rank_outer_product(self, spec3):
        col = np.array([0.4, -0.3, 0.8])
        p = CanonicalParametrization(3, (0, 1, 2), np.zeros((0, 3)), np.outer(col, col))
        kap = spec3.kappa
        sq = np.sqrt(kap)
        for r in (0.0, 0.3, 1.1, 4.0):
            x = np.exp(-kap * r) * col
            expected = np.diag(kap) - 2.0 / (1.0 + x @ x) * np.outer(sq * x, sq * x)
            np.testing.assert_allclose(superpotential_canonical(p, spec3, r), expected, atol=1e-13)

    def test_symmetric_everywhere(self, presets):
        for _, res in presets.values():
            u = res.superpotential(RADII)
            assert np.abs(u - np.swapaxes(u, 1, 2)).max() < 1e-10


class TestClosedForms:
    def test_two_channel_rank_one(self, fig1_spec):
        q0 = 0.6
        p = CanonicalParametrization(1, (0, 1), [[q0]], [[0.0]])
        k1, k2 = fig1_spec.kappa
        for r in (0.0, 0.5, 2.0):
            q = q0 * math.exp((k2 - k1) * r)
            den = 1 + q * q
            expected = np.array(
                [[(1 - q * q) / den * k1, 2 * q * math.sqrt(k1 * k2) / den],
                 [2 * q * math.sqrt(k1 * k2) / den, -(1 - q * q) / den * k2]]
            )
            np.testing.assert_allclose(superpotential_closed_forms(p, fig1_spec, r), expected, atol=1e-13)

    def test_row_form_with_zero_q(self, spec3):
        p = CanonicalParametrization(2, (0, 1, 2), [[0.0, 0.0]], np.zeros((2, 2)))
        u = superpotential_closed_forms(p, spec3, 1.3)
        kap = spec3.kappa
        np.testing.assert_allclose(u, np.diag([kap[0], kap[1], -kap[2]]), atol=1e-14)

    def test_requires_zero_x0(self, spec3):
        p = CanonicalParametrization(2, (0, 1, 2), [[0.1, 0.2]], [[0.1, 0.0], [0.0, 0.0]])
        with pytest.raises(PreconditionViolated):
            superpotential_closed_forms(p, spec3, 1.0)

    @settings(max_examples=40, deadline=None)
    @given(st.floats(-3, 3), st.floats(-3, 3), st.booleans())
    def test_agree_with_canonical(self, spec3, a, b, row):
        if row:
            p = CanonicalParametrization(2, (0, 1, 2), [[a, b]], np.zeros((2, 2)))
        else:
            p = CanonicalParametrization(1, (0, 1, 2), [[a], [b]], [[0.0]])
        radii = np.linspace(0.0, 6.0, 20)
        np.testing.assert_allclose(
            superpotential_closed_forms(p, spec3, radii), superpotential_canonical(p, spec3, radii), atol=1e-12
        )


class TestAsymptotics:
    def test_growing_and_decaying(self, fig1_spec):
        kap = np.diag(fig1_spec.kappa)
        np.testing.assert_array_equal(u_at_infinity(U0Parametrization(kap), fig1_spec), kap)
        np.testing.assert_array_equal(u_at_infinity(U0Parametrization(-kap), fig1_spec), -kap)

    def test_rank_one_preset(self, presets):
        p, res = presets["fig3"]
        np.testing.assert_allclose(res.u_at_infinity, np.diag([p.spec.kappa[0], -p.kappa2]), rtol=1e-15)

    @pytest.mark.parametrize("name", ["fig1", "fig2", "fig3"])
    def test_exponential_tail(self, presets, name):
        p, res = presets[name]
        slope = res.tail_decay_rate(3.0, 7.0)
        assert slope < 0
        if res.rank == p.spec.n:
            assert -slope >= 2 * p.spec.kappa.min() * 0.9


class TestPotential:
    def test_trivial_vanishes(self, fig1_spec):
        v = transformed_potential(U0Parametrization(np.diag(fig1_spec.kappa)), fig1_spec, RADII)
        assert np.abs(v).max() < 1e-12

    def test_value_at_origin(self, presets):
        _, res = presets["fig1"]
        np.testing.assert_allclose(res.potential(0.0), [[-29.28, -4.8], [-4.8, -9.28]], atol=1e-12)

    @pytest.mark.parametrize("name", ["fig1", "fig3"])
    def test_matches_finite_difference(self, presets, name):
        _, res = presets[name]
        r = np.array([0.3, 1.0, 2.5])
        errors = []
        for h in (1e-2, 5e-3, 2.5e-3):
            du = (res.superpotential(r + h) - res.superpotential(r - h)) / (2 * h)
            errors.append(np.abs(-2.0 * du - res.potential(r)).max())
        # second-order refinement
        assert errors[0] / errors[1] == pytest.approx(4.0, rel=0.05)
        assert errors[1] / errors[2] == pytest.approx(4.0, rel=0.05)
        assert errors[-1] < 1e-3

    def test_decays(self, presets):
        for _, res in presets.values():
            assert np.abs(res.potential(12.0)).max() < 1e-6 * np.abs(res.potential(0.0)).max()


def _second_derivative(f, r, h=1e-3):
    return (-f(r + 2 * h) + 16 * f(r + h) - 30 * f(r) + 16 * f(r - h) - f(r - 2 * h)) / (12 * h * h)


class TestJost:
    def test_trivial(self, fig1_spec):
        p = U0Parametrization(np.diag(fig1_spec.kappa))
        for e in (-3.0, 5.0, 15.0):
            np.testing.assert_allclose(transformed_jost(p, fig1_spec, e), np.eye(2), atol=1e-14)
            k = channel_wavenumbers(e, fig1_spec.channels).values
            np.testing.assert_allclose(
                transformed_jost_solution(p, fig1_spec, e, 1.7), np.diag(np.exp(1j * k * 1.7)), atol=1e-14
            )

    def test_explicit_zero_initial_potential(self, presets):
        _, res = presets["fig1"]
        k = channel_wavenumbers(12.0, res.spec.channels).values
        initial = (lambda kk: np.eye(2), lambda kk: -np.diag(1j * kk))
        np.testing.assert_allclose(res.jost_k(k, initial), res.jost_k(k), atol=1e-15)

    @pytest.mark.parametrize("name", ["fig1", "fig2", "fig3"])
    @pytest.mark.parametrize("energy", [-2.0, 4.0, 12.0, 19.0])
    def test_jost_solution_at_origin(self, presets, name, energy):
        _, res = presets[name]
        np.testing.assert_allclose(res.jost_solution(energy, 0.0).T, res.jost(energy), atol=1e-10)

    @pytest.mark.parametrize("name", ["fig1", "fig3"])
    def test_jost_solution_asymptotics(self, presets, name):
        _, res = presets[name]
        k = channel_wavenumbers(14.0, res.spec.channels).values
        f = res.jost_solution(14.0, 25.0) * np.exp(-1j * k * 25.0)[None, :]
        np.testing.assert_allclose(f, np.eye(2), atol=1e-9)

    @pytest.mark.parametrize("name", ["fig1", "fig3"])
    def test_derivative_consistent(self, presets, name):
        _, res = presets[name]
        h = 1e-5
        fd = (res.jost_solution(13.0, 1.0 + h) - res.jost_solution(13.0, 1.0 - h)) / (2 * h)
        np.testing.assert_allclose(res.jost_solution_derivative(13.0, 1.0), fd, atol=1e-7)

    def test_intertwining(self, presets):
        rng = np.random.default_rng(7)
        for name in ("fig1", "fig2", "fig3"):
            _, res = presets[name]
            for _ in range(7):
                e, r = rng.uniform(-5.0, 25.0), rng.uniform(0.2, 5.0)
                k = channel_wavenumbers(e, res.spec.channels).values
                ik = np.diag(1j * k)
                # A- applied to the free Jost solution e^{ikr}
                chi = lambda s: (res.superpotential(s) - ik) @ np.diag(np.exp(1j * k * s))
                resid = _second_derivative(chi, r) + (np.diag(k**2) - res.potential(r)) @ chi(r)
                scale = np.abs(_second_derivative(chi, r)).max() + 1.0
                assert np.abs(resid).max() / scale < 1e-6


class TestFactorizationEnergySolutions:
    def test_trivial(self, fig1_spec):
        res = transform(fig1_spec, U0Parametrization(np.diag(fig1_spec.kappa)))
        phi, _ = res.solution_at_factorization_energy(1.2)
        np.testing.assert_allclose(phi.value, np.diag(np.exp(-1.2 * fig1_spec.kappa)), rtol=1e-13)

    @pytest.mark.parametrize("name,radii", [("fig1", (0.5, 1.5, 3.0)), ("fig3", (0.5, 1.0, 1.5))])
    def test_wronskian(self, presets, name, radii):
        # rank-deficient C makes sigma ill-conditioned as r grows, so fig3 stays near the origin
        _, res = presets[name]
        for r in radii:
            phi, psi = res.solution_at_factorization_energy(r)
            np.testing.assert_allclose(wronskian(phi, psi), -np.eye(2), atol=1e-9)

    def test_solves_equation(self, presets):
        _, res = presets["fig1"]
        kap2 = np.diag(res.spec.kappa**2)
        phi = lambda s: res.solution_at_factorization_energy(s)[0].value
        r = 0.8
        resid = _second_derivative(phi, r) - (res.potential(r) + kap2) @ phi(r)
        assert np.abs(resid).max() < 1e-6


class TestParameterMaps:
    def test_off_diagonal_entry(self, fig1_spec, fig_u0):
        p = canonical_from_u0_2x2(fig_u0, fig1_spec)
        k1, k2 = fig1_spec.kappa
        det = (-2 + k1) * (-2 + k2) - 0.36
        assert p.x0[0, 1] == pytest.approx(-2 * 0.6 * math.sqrt(k1 * k2) / det, rel=1e-14)

    def test_trivial(self, fig1_spec):
        p = canonical_from_u0_2x2(np.diag(fig1_spec.kappa), fig1_spec)
        np.testing.assert_allclose(p.x0, 0.0, atol=1e-15)

    def test_rank_drop(self, presets):
        p, _ = presets["fig3"]
        with pytest.raises(RankDrop):
            canonical_from_u0_2x2(p.u0, p.spec)

    @settings(max_examples=40, deadline=None)
    @given(st.floats(-1.5, 6), st.floats(-1.5, 6), st.floats(-1.5, 1.5))
    def test_round_trip(self, fig1_spec, a1, a2, b):
        u0 = np.array([[a1, b], [b, a2]])
        try:
            p = canonical_from_u0_2x2(u0, fig1_spec)
            res = transform(fig1_spec, U0Parametrization(u0))
        except (RankDrop, SingularSigma):
            return
        np.testing.assert_allclose(u0_from_canonical_2x2(p, fig1_spec), u0, atol=1e-10)
        np.testing.assert_allclose(superpotential_canonical(p, fig1_spec, RADII[:50]),
                                   res.superpotential(RADII[:50]), atol=1e-10)


class TestParameterCount:
    @pytest.mark.parametrize("n,rank", [(2, 1), (2, 2), (3, 2), (3, 1)])
    def test_jacobian_rank(self, n, rank):
        if n == 2:
            spec = FactorizationSpec(ChannelSet((10.0, 0.0)), -9.0)
        else:
            spec = FactorizationSpec(ChannelSet((20.0, 10.0, 0.0)), -1.0)
        rng = np.random.default_rng(n * 10 + rank)
        q0 = rng.uniform(0.2, 0.6, size=(n - rank, rank))
        x = rng.uniform(-0.3, 0.3, size=(rank, rank))
        p = CanonicalParametrization(rank, tuple(range(n)), q0, 0.5 * (x + x.T) + np.eye(rank))
        found, nparams = potential_jacobian_rank(p, spec, np.linspace(0.0, 4.0, 40))
        assert nparams == free_parameter_count(n, rank)
        assert found == free_parameter_count(n, rank)

    def test_counts(self):
        assert [free_parameter_count(2, 1), free_parameter_count(2, 2), free_parameter_count(3, 2)] == [2, 3, 5]
