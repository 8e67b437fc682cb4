"""Profile space: pieces, C^2 gluing, torpedoes, membership checkers."""

import io

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from gllab.errors import InvalidSpecError
from gllab.fnspace import (ConstPiece, PolyPiece, SinePiece, SmoothFn1D,
                           TorpedoSpec, check_F_membership,
                           check_U_membership, check_V_membership,
                           linear_homotopy, make_double_torpedo,
                           make_torpedo, reflect, sample_grid, scale,
                           write_profile_csv)


def _sin_profile(b=np.pi):
    return SmoothFn1D(b, [SinePiece((0.0, b), 1.0, 1.0)])


class TestPieces:
    def test_poly_derivatives(self):
        p = PolyPiece((0.0, 1.0), [1.0, 2.0, 3.0])  # 1 + 2t + 3t^2
        t = np.linspace(0.0, 1.0, 7)
        assert np.allclose(p.eval(t), 1 + 2 * t + 3 * t ** 2)
        assert np.allclose(p.eval(t, 1), 2 + 6 * t)
        assert np.allclose(p.eval(t, 2), 6.0)
        assert np.allclose(p.eval(t, 3), 0.0)

    def test_sine_derivatives(self):
        p = SinePiece((0.0, 1.0), 2.0, 3.0, phase=0.5)
        t = np.linspace(0.0, 1.0, 7)
        assert np.allclose(p.eval(t, 1), 6.0 * np.cos(3 * t + 0.5))
        assert np.allclose(p.eval(t, 2), -18.0 * np.sin(3 * t + 0.5))

    def test_junction_contract_enforced(self):
        good = SmoothFn1D(2.0, [ConstPiece((0, 1), 1.0),
                                ConstPiece((1, 2), 1.0)])
        assert good(1.5) == 1.0
        with pytest.raises(InvalidSpecError):
            SmoothFn1D(2.0, [ConstPiece((0, 1), 1.0),
                             ConstPiece((1, 2), 2.0)])

    def test_json_round_trip(self):
        f = make_torpedo(TorpedoSpec(0.5))
        g = SmoothFn1D.loads(f.dumps(),
                             junction_orders=f.junction_orders)
        t = sample_grid(f.b, 128)
        assert np.allclose(f(t), g(t), atol=0, rtol=0)


class TestTorpedo:
    @pytest.mark.parametrize("delta", [0.25, 0.5, 1.0])
    def test_cap_tube_shape(self, delta):
        f = make_torpedo(TorpedoSpec(delta, tube_length=1.0))
        # round cap at the start, constant tube at the end
        t_cap = np.linspace(0.0, delta * np.pi / 4.0, 50)
        assert np.allclose(f(t_cap), delta * np.sin(t_cap / delta))
        assert np.allclose(f(f.b), delta)
        assert abs(f.d1(0.0) - 1.0) < 1e-12

    @pytest.mark.parametrize("delta", [0.25, 0.5, 1.0])
    def test_blend_concave(self, delta):
        f = make_torpedo(TorpedoSpec(delta))
        t = sample_grid(f.b, 4096)
        assert float(np.max(f.d2(t))) <= 1e-10

    def test_zero_blend_is_c1(self):
        f = make_torpedo(TorpedoSpec(0.5, blend_width=0.0))
        assert f.junction_orders == (0, 1)
        t = sample_grid(f.b, 512)
        assert np.min(f(t)) >= 0.0

    def test_invalid_specs(self):
        with pytest.raises(InvalidSpecError):
            TorpedoSpec(0.0)
        with pytest.raises(InvalidSpecError):
            TorpedoSpec(-1.0)
        with pytest.raises(InvalidSpecError):
            TorpedoSpec(0.5, blend_width=-0.1)
        with pytest.raises(InvalidSpecError):
            TorpedoSpec(0.5, blend_width=0.5 * np.pi / 4.0)

    @given(delta=st.floats(0.05, 2.0), frac=st.floats(0.0, 0.45))
    @settings(max_examples=40, deadline=None)
    def test_profile_bounded_by_delta(self, delta, frac):
        f = make_torpedo(TorpedoSpec(delta,
                                     blend_width=frac * delta * np.pi / 2))
        t = sample_grid(f.b, 512)
        vals = f(t)
        assert np.all(vals <= delta + 1e-12)
        assert np.all(vals >= -1e-12)

    def test_double_torpedo_symmetric(self):
        f = make_double_torpedo(0.5, 6.0)
        t = np.linspace(0.0, 6.0, 101)
        assert np.allclose(f(t), f(6.0 - t), atol=1e-12)


class TestMembership:
    def test_sin_is_closed_sphere_profile(self):
        assert check_F_membership(_sin_profile()).passed

    def test_tube_fails_closed_membership(self):
        f = make_torpedo(TorpedoSpec(0.5))
        assert not check_F_membership(f).passed

    def test_U_and_V(self):
        b = np.pi / 2
        u = SmoothFn1D(b, [SinePiece((0, b), 1.0, 1.0, phase=np.pi / 2)])
        v = SmoothFn1D(b, [SinePiece((0, b), 1.0, 1.0)])
        assert check_U_membership(u).passed
        assert check_V_membership(v).passed
        # swapped roles fail: v opens at 0, u closes at b
        assert not check_U_membership(v).passed
        assert not check_V_membership(u).passed

    def test_reflected_torpedo_in_U(self):
        f = reflect(make_torpedo(TorpedoSpec(0.5, tube_length=1.0)))
        assert check_U_membership(f).passed

    def test_torpedo_in_V(self):
        assert check_V_membership(make_torpedo(TorpedoSpec(0.5))).passed


class TestStructuralOps:
    def test_reflect_involution(self):
        f = make_torpedo(TorpedoSpec(0.5))
        g = reflect(reflect(f))
        t = sample_grid(f.b, 256)
        assert np.allclose(f(t), g(t), atol=1e-14)
        assert np.allclose(f.d1(t), g.d1(t), atol=1e-12)

    def test_scale(self):
        f = _sin_profile()
        g = scale(f, 2.5)
        t = sample_grid(f.b, 128)
        assert np.allclose(g(t), 2.5 * f(t))
        assert np.allclose(g.d2(t), 2.5 * f.d2(t))

    def test_linear_homotopy_endpoints_and_midpoint(self):
        f0 = make_torpedo(TorpedoSpec(0.5, tube_length=1.0))
        b = f0.b
        f1 = SmoothFn1D(b, [SinePiece((0, b), b / np.pi, np.pi / b)])
        t = sample_grid(b, 256)
        assert np.allclose(linear_homotopy(f0, f1, 0.0)(t), f0(t),
                           atol=1e-12)
        assert np.allclose(linear_homotopy(f0, f1, 1.0)(t), f1(t),
                           atol=1e-12)
        mid = linear_homotopy(f0, f1, 0.5)
        assert np.allclose(mid(t), 0.5 * (f0(t) + f1(t)), atol=1e-12)
        assert np.allclose(mid.d2(t), 0.5 * (f0.d2(t) + f1.d2(t)),
                           atol=1e-10)

    def test_homotopy_preserves_V_membership(self):
        f0 = make_torpedo(TorpedoSpec(0.5, tube_length=1.0))
        b = f0.b
        f1 = make_torpedo(TorpedoSpec(
            0.25, tube_length=b - 0.25 * np.pi / 2
            - TorpedoSpec(0.25).blend_width))
        for s in (0.25, 0.5, 0.75):
            assert check_V_membership(linear_homotopy(f0, f1, s)).passed

    def test_csv_export(self):
        buf = io.StringIO()
        write_profile_csv(_sin_profile(), buf, density=64)
        lines = buf.getvalue().strip().splitlines()
        assert lines[0] == "t,f,d1,d2"
        assert len(lines) > 64
