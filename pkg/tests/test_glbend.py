"""Bending curve synthesis: inequalities, segments, assembly, isotopies."""

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from gllab.errors import (ConstructionFailedError, InvalidBendError,
                          InvalidSpecError, InversionError,
                          NoFeasibleBendError, OutOfRegimeError,
                          TiltTooLargeError)
from gllab.glbend import (ArcSeg, BendConstants, BumpSeg, Curve2D, LineSeg,
                          assemble_gamma, check_cureqn, check_diffkeqn,
                          check_keqn, final_bending_tilt, final_isotopy,
                          initial_bend, initial_isotopy, mu_inequality,
                          quarter_bend_curve, rhs_cureqn, synth_transition)

MODEL = BendConstants(R0=1.5, q=3)


class TestInequalityLedger:
    def test_rhs_pin(self):
        # frozen regression value, computed independently
        consts = BendConstants(R0=1.0, C=4.0, Cp=0.0, q=3)
        assert np.isclose(rhs_cureqn(consts, 0.3, 0.2),
                          2.596105872648038, rtol=1e-12)

    def test_theta_zero_is_infinite(self):
        assert rhs_cureqn(MODEL, 0.3, 0.0) == np.inf

    def test_concave_passes_unconditionally(self):
        assert check_cureqn(MODEL, -5.0, 0.3, 0.2) == np.inf
        assert check_cureqn(MODEL, 0.0, 0.3, 0.2) == np.inf

    def test_keqn_regime_guards(self):
        consts = BendConstants(R0=1.0, C=4.0, q=2)
        # r0 bound = 1/sqrt(4C) = 0.25
        assert check_keqn(0.1, 0.2, 0.5, consts, r0=0.24, theta0=0.3)
        with pytest.raises(OutOfRegimeError):
            check_keqn(0.1, 0.2, 0.5, consts, r0=0.3, theta0=0.3)
        with pytest.raises(OutOfRegimeError):
            check_keqn(0.1, 0.5, 0.5, consts, r0=0.24, theta0=0.3)
        with pytest.raises(OutOfRegimeError):
            check_keqn(0.1, 0.2, 0.1, consts, r0=0.24, theta0=0.3)

    @given(mu=st.floats(0.0, 1.0), b=st.floats(0.0, 0.2499))
    @settings(max_examples=200, deadline=None)
    def test_mu_inequality_nonnegative(self, mu, b):
        assert mu_inequality(mu, b) >= -1e-15

    def test_mu_zero_only_at_one(self):
        mu = np.linspace(0.0, 1.0, 101)
        vals = mu_inequality(mu, 0.2)
        zero = np.isclose(vals, 0.0, atol=1e-12)
        assert zero.sum() == 1 and zero[-1]


class TestSegments:
    def test_unit_speed_all_kinds(self):
        segs = Curve2D([
            LineSeg((0.0, 1.0), (0.0, 0.5)),
            BumpSeg((0.0, 0.5), 0.0, 1.2, 0.25),
        ])
        assert segs.unit_speed_residual() < 1e-8
        arc = Curve2D([ArcSeg((1.0, 1.0), 0.5, 0.0, np.pi / 2)])
        assert arc.unit_speed_residual() < 1e-8

    def test_quarter_bend_length_pin(self):
        c = quarter_bend_curve(2.0, 2.0, 0.5)
        assert np.isclose(c.length, 1.5 + 1.5 + np.pi / 4, rtol=1e-12)

    def test_quarter_bend_guards(self):
        with pytest.raises(InvalidBendError):
            quarter_bend_curve(1.0, 1.0, 1.5)
        with pytest.raises(InvalidBendError):
            quarter_bend_curve(1.0, 1.0, 0.4, eps=0.7)
        with pytest.raises(InvalidBendError):
            quarter_bend_curve(1.0, 1.0, 0.4, delta=0.5)


class TestSynthesis:
    def test_initial_bend_certifies(self):
        prefix, theta0, k_max = initial_bend(MODEL, r1=0.5)
        assert 0 < theta0 < np.pi / 2
        assert k_max > 0

    def test_initial_bend_r0_zero_fails(self):
        with pytest.raises(NoFeasibleBendError):
            initial_bend(BendConstants(R0=0.0, q=2), r1=0.5)

    def test_transition_junctions_and_diffkeqn(self):
        _, theta0, _ = initial_bend(MODEL, r1=0.5)
        params, f = synth_transition(MODEL, r0=0.2, theta0=theta0)
        # C2 junction residuals: adjacent pieces evaluated at the breakpoint
        for left, right in zip(f.pieces, f.pieces[1:]):
            t = left.interval[1]
            for order in (0, 1, 2):
                lv = float(left.eval(t, order))
                rv = float(right.eval(t, order))
                assert abs(lv - rv) < 1e-8 * max(1.0, abs(lv), abs(rv))
        assert check_diffkeqn(f) > 0
        # frozen identities of the three-piece construction
        assert np.isclose(params.t0p, params.t0 + params.delta0)
        assert np.isclose(params.C2,
                          params.t0p - 2 * params.m0 / params.C1
                          - params.delta0 / 2)
        assert np.isclose(float(f(params.tinf)),
                          params.c - params.C1 * params.delta_inf ** 2 / 48)

    @pytest.mark.parametrize("q", [2, 3, 4])
    def test_assemble_gamma_certifies(self, q):
        consts = BendConstants(R0=1.5, q=q)
        prefix = initial_bend(consts, r1=0.5)
        trans = synth_transition(consts, r0=0.2, theta0=prefix[1])
        profile = assemble_gamma(consts, prefix, trans)
        cert = profile.certificate
        assert cert.passed and cert.min_scalar > 0
        assert profile.curve.junction_residual() < 1e-8


@pytest.fixture(scope="module")
def transition():
    prefix = initial_bend(MODEL, r1=0.5)
    return synth_transition(MODEL, r0=0.2, theta0=prefix[1])


class TestIsotopies:

    def test_initial_isotopy_scaling_family(self):
        from gllab.fnspace import PolyPiece, SmoothFn1D
        # gentle graph with slope below 1/2 everywhere
        f0 = SmoothFn1D(1.0, [PolyPiece((0.0, 1.0), [1.0, 0.3, 0.05])])
        family, min_expr = initial_isotopy(f0, lambda_grid=[0.0, 0.5, 1.0])
        assert min_expr >= -1e-12
        t = np.linspace(0.0, 1.0, 11)
        assert np.allclose(family[-1](t), f0(t))
        assert np.allclose(family[0](t), 0.0)
        assert np.allclose(family[1](t), 0.5 * f0(t))

    def test_initial_isotopy_slope_guard(self, transition):
        _params, f = transition
        # the transition graph starts far steeper than 1/2
        with pytest.raises(OutOfRegimeError):
            initial_isotopy(f)

    def test_tilt_identity_at_tinf(self, transition):
        params, f = transition
        assert final_bending_tilt(transition, params.tinf) is f

    def test_tilt_out_of_window(self, transition):
        params, _ = transition
        with pytest.raises(InvalidSpecError):
            final_bending_tilt(transition, params.C2 - 0.01)

    def test_tilt_preserves_range_and_margin(self, transition):
        params, f = transition
        g = final_bending_tilt(transition, params.C2)
        assert np.isclose(float(g(g.b)), float(f(params.tinf)), atol=1e-9)
        assert check_diffkeqn(g) > 0

    def test_tilt_too_large(self, transition):
        params, _ = transition
        with pytest.raises((TiltTooLargeError, ConstructionFailedError)):
            final_bending_tilt(transition, params.C2,
                               extend_to=params.tinf + 100.0)

    def test_final_isotopy_margins_positive(self, transition):
        params, _ = transition
        g = final_bending_tilt(transition, params.C2)
        family, margins = final_isotopy(g, (params.r0, params.m0))
        assert len(margins) == 21
        assert min(margins) > 0
        # endpoints: h_0 = f, h_1 = line
        t = np.linspace(0.0, g.b, 50)[1:-1]
        assert np.allclose(family[0](t), g(t), atol=1e-8)
        h1 = family[-1]
        tl = np.linspace(0.0, h1.b, 50)[1:-1]
        assert np.allclose(h1(tl), params.r0 + params.m0 * tl, atol=1e-8)

    def test_final_isotopy_inversion_invariant(self, transition):
        params, _ = transition
        g = final_bending_tilt(transition, params.C2)
        family, _ = final_isotopy(g, (params.r0, params.m0),
                                  s_grid=[0.0, 0.5, 1.0])
        for h in family:
            t = np.linspace(0.0, h.b, 33)[1:-1]
            for tv in t:
                r = float(h(tv))
                t_back = h._hinv(r)
                assert abs(float(h(t_back)) - r) < 1e-8

    def test_final_isotopy_guards(self, transition):
        params, _ = transition
        g = final_bending_tilt(transition, params.C2)
        with pytest.raises(InvalidSpecError):
            final_isotopy(g, (params.r0 + 1.0, params.m0))
        with pytest.raises(InversionError):
            final_isotopy(g, (params.r0, 0.5))
