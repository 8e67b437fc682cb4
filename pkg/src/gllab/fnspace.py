"""Piecewise-analytic 1-D profile functions and their membership predicates.

Profiles are C^2 functions on (0, b) carrying derivative evaluation up to
order 3.  They are the carriers for every rotationally symmetric metric in the
toolkit: cap/tube ("torpedo") profiles, round-sphere profiles, and the various
deformation families built from them.

Three families of membership predicates are provided:

* ``check_F_membership``  -- profiles closing a sphere at both ends,
* ``check_U_membership``  -- profiles positive at 0 and closing at b,
* ``check_V_membership``  -- profiles closing at 0 and positive at b.

All three families are convex, which is what makes linear homotopies between
members useful; see ``linear_homotopy``.
"""

from __future__ import annotations

import io
import json
from dataclasses import dataclass, field

import numpy as np
from scipy.interpolate import CubicSpline, PPoly

from .errors import ConstructionFailedError, DomainMismatchError, InvalidSpecError

__all__ = [
    "SmoothFn1D",
    "TorpedoSpec",
    "MembershipReport",
    "ConditionResult",
    "PolyPiece",
    "SinePiece",
    "ConstPiece",
    "SplinePiece",
    "LinCombPiece",
    "ReflectPiece",
    "make_torpedo",
    "make_double_torpedo",
    "check_F_membership",
    "check_U_membership",
    "check_V_membership",
    "linear_homotopy",
    "reflect",
    "scale",
    "sample_grid",
    "write_profile_csv",
]

DEFAULT_JUNCTION_TOL = 1e-9
DEFAULT_GRID_DENSITY = 1024  # points per unit length


def sample_grid(b, density=DEFAULT_GRID_DENSITY, interior=False):
    """Uniform sample grid on [0, b] (or its open interior)."""
    n = max(int(np.ceil(b * density)), 16)
    if interior:
        return np.linspace(0.0, b, n + 2)[1:-1]
    return np.linspace(0.0, b, n + 1)


# ---------------------------------------------------------------------------
# analytic pieces
# ---------------------------------------------------------------------------

class PolyPiece:
    """Polynomial sum c_k (t - origin)^k on an interval."""

    kind = "poly"

    def __init__(self, interval, coeffs, origin=0.0):
        self.interval = (float(interval[0]), float(interval[1]))
        self.coeffs = np.asarray(coeffs, dtype=float)
        self.origin = float(origin)
        # precompute derivative coefficient stacks up to order 3
        self._dcoeffs = [self.coeffs]
        for _ in range(3):
            self._dcoeffs.append(np.polynomial.polynomial.polyder(self._dcoeffs[-1]))

    def eval(self, t, order=0):
        t = np.asarray(t, dtype=float)
        if order > 3 + len(self.coeffs):
            return np.zeros_like(t)
        c = self._dcoeffs[order] if order <= 3 else np.polynomial.polynomial.polyder(self.coeffs, order)
        if c.size == 0:
            return np.zeros_like(t)
        return np.polynomial.polynomial.polyval(t - self.origin, c)

    def to_json(self):
        return {"kind": self.kind, "interval": list(self.interval),
                "coeffs": self.coeffs.tolist(), "origin": self.origin}


class SinePiece:
    """A * sin(w*t + phase)."""

    kind = "sine"

    def __init__(self, interval, amplitude, frequency, phase=0.0):
        self.interval = (float(interval[0]), float(interval[1]))
        self.amplitude = float(amplitude)
        self.frequency = float(frequency)
        self.phase = float(phase)

    def eval(self, t, order=0):
        t = np.asarray(t, dtype=float)
        a = self.amplitude * self.frequency ** order
        return a * np.sin(self.frequency * t + self.phase + order * np.pi / 2.0)

    def to_json(self):
        return {"kind": self.kind, "interval": list(self.interval),
                "coeffs": [self.amplitude, self.frequency, self.phase]}


class ConstPiece:
    kind = "const"

    def __init__(self, interval, value):
        self.interval = (float(interval[0]), float(interval[1]))
        self.value = float(value)

    def eval(self, t, order=0):
        t = np.asarray(t, dtype=float)
        return np.full_like(t, self.value) if order == 0 else np.zeros_like(t)

    def to_json(self):
        return {"kind": self.kind, "interval": list(self.interval),
                "coeffs": [self.value]}


class SplinePiece:
    """Tabulated cubic spline (C^2; third derivative is piecewise constant)."""

    kind = "spline"

    def __init__(self, interval, ppoly):
        self.interval = (float(interval[0]), float(interval[1]))
        self.ppoly = ppoly
        self._derivs = [ppoly]
        for _ in range(3):
            self._derivs.append(self._derivs[-1].derivative())

    @classmethod
    def from_samples(cls, x, y, bc_type="not-a-knot"):
        cs = CubicSpline(x, y, bc_type=bc_type)
        return cls((x[0], x[-1]), cs)

    def eval(self, t, order=0):
        t = np.asarray(t, dtype=float)
        if order > 3:
            return np.zeros_like(t)
        return self._derivs[order](t)

    def to_json(self):
        return {"kind": self.kind, "interval": list(self.interval),
                "knots": np.asarray(self.ppoly.x).tolist(),
                "coeffs": np.asarray(self.ppoly.c).tolist()}


class LinCombPiece:
    """Weighted sum of other pieces (used by homotopies and rescalings)."""

    kind = "linear-combination"

    def __init__(self, interval, terms):
        self.interval = (float(interval[0]), float(interval[1]))
        self.terms = [(float(w), p) for w, p in terms]

    def eval(self, t, order=0):
        t = np.asarray(t, dtype=float)
        out = np.zeros_like(t)
        for w, p in self.terms:
            if w != 0.0:
                out = out + w * p.eval(t, order)
        return out

    def to_json(self):
        return {"kind": self.kind, "interval": list(self.interval),
                "terms": [[w, p.to_json()] for w, p in self.terms]}


class ReflectPiece:
    """Evaluates inner(b - t); reflection about the domain midpoint."""

    kind = "reflect"

    def __init__(self, interval, inner, b):
        self.interval = (float(interval[0]), float(interval[1]))
        self.inner = inner
        self.b = float(b)

    def eval(self, t, order=0):
        t = np.asarray(t, dtype=float)
        sign = -1.0 if order % 2 else 1.0
        return sign * self.inner.eval(self.b - t, order)

    def to_json(self):
        return {"kind": self.kind, "interval": list(self.interval),
                "b": self.b, "of": self.inner.to_json()}


def _piece_from_json(d):
    kind = d["kind"]
    if kind == "poly":
        return PolyPiece(d["interval"], d["coeffs"], d.get("origin", 0.0))
    if kind == "sine":
        a, w, ph = d["coeffs"]
        return SinePiece(d["interval"], a, w, ph)
    if kind == "const":
        return ConstPiece(d["interval"], d["coeffs"][0])
    if kind == "spline":
        pp = PPoly(np.asarray(d["coeffs"]), np.asarray(d["knots"]))
        return SplinePiece(d["interval"], pp)
    if kind == "linear-combination":
        return LinCombPiece(d["interval"],
                            [(w, _piece_from_json(p)) for w, p in d["terms"]])
    if kind == "reflect":
        return ReflectPiece(d["interval"], _piece_from_json(d["of"]), d["b"])
    raise InvalidSpecError(f"unknown piece kind {kind!r}")


# ---------------------------------------------------------------------------
# the profile carrier
# ---------------------------------------------------------------------------

class SmoothFn1D:
    """Piecewise-analytic C^2 function on (0, b), derivatives up to order 3.

    ``pieces`` must tile [0, b] with strictly increasing breakpoints.  At every
    interior breakpoint the adjacent pieces must agree in value and in the
    derivative orders listed in ``junction_orders`` (default: 0, 1, 2 -- the
    C^2 contract) to within ``junction_tolerance``.
    """

    def __init__(self, b, pieces, junction_tolerance=DEFAULT_JUNCTION_TOL,
                 junction_orders=(0, 1, 2)):
        self.b = float(b)
        self.pieces = list(pieces)
        self.junction_tolerance = float(junction_tolerance)
        self.junction_orders = tuple(junction_orders)
        if self.b <= 0:
            raise InvalidSpecError("domain length must be positive")
        if not self.pieces:
            raise InvalidSpecError("need at least one piece")
        self._validate_partition()
        self._validate_junctions()
        # interior breakpoints for piece lookup
        self._breaks = np.array([p.interval[1] for p in self.pieces[:-1]])

    def _validate_partition(self):
        tol = max(self.junction_tolerance, 1e-12) * max(1.0, self.b)
        if abs(self.pieces[0].interval[0]) > tol:
            raise InvalidSpecError("first piece must start at 0")
        if abs(self.pieces[-1].interval[1] - self.b) > tol:
            raise InvalidSpecError("last piece must end at b")
        for left, right in zip(self.pieces, self.pieces[1:]):
            if abs(left.interval[1] - right.interval[0]) > tol:
                raise InvalidSpecError("pieces must tile (0, b) contiguously")
            if right.interval[1] <= left.interval[1]:
                raise InvalidSpecError("breakpoints must strictly increase")

    def _validate_junctions(self):
        for left, right in zip(self.pieces, self.pieces[1:]):
            t = left.interval[1]
            for order in self.junction_orders:
                lv = float(left.eval(t, order))
                rv = float(right.eval(t, order))
                scale_ = max(1.0, abs(lv), abs(rv))
                if abs(lv - rv) > self.junction_tolerance * scale_:
                    raise InvalidSpecError(
                        f"junction at t={t:.6g} fails C{order} contract: "
                        f"{lv!r} vs {rv!r}")

    def _eval(self, t, order):
        t = np.asarray(t, dtype=float)
        scalar = (t.ndim == 0)
        tv = np.atleast_1d(t)
        if tv.size and (tv.min() < -1e-9 * max(1.0, self.b)
                        or tv.max() > self.b * (1 + 1e-9) + 1e-9):
            raise InvalidSpecError(
                f"evaluation outside [0, {self.b}]: range "
                f"[{tv.min()}, {tv.max()}]")
        idx = np.searchsorted(self._breaks, tv, side="right")
        out = np.empty_like(tv)
        for i, piece in enumerate(self.pieces):
            mask = idx == i
            if mask.any():
                out[mask] = piece.eval(tv[mask], order)
        return out[0] if scalar else out

    def __call__(self, t):
        return self._eval(t, 0)

    def d1(self, t):
        return self._eval(t, 1)

    def d2(self, t):
        return self._eval(t, 2)

    def d3(self, t):
        return self._eval(t, 3)

    # -- serialization ------------------------------------------------------

    def to_json(self):
        return {"b": self.b, "pieces": [p.to_json() for p in self.pieces]}

    @classmethod
    def from_json(cls, d, **kw):
        return cls(d["b"], [_piece_from_json(p) for p in d["pieces"]], **kw)

    def dumps(self):
        return json.dumps(self.to_json(), sort_keys=True)

    @classmethod
    def loads(cls, s, **kw):
        return cls.from_json(json.loads(s), **kw)


def write_profile_csv(f, path_or_buf, density=DEFAULT_GRID_DENSITY):
    """CSV sampling export with columns t, f, f', f''."""
    t = sample_grid(f.b, density)
    data = np.column_stack([t, f(t), f.d1(t), f.d2(t)])
    header = "t,f,d1,d2"
    if hasattr(path_or_buf, "write"):
        np.savetxt(path_or_buf, data, fmt="%.17g", delimiter=",",
                   header=header, comments="")
    else:
        with open(path_or_buf, "w") as fh:
            np.savetxt(fh, data, fmt="%.17g", delimiter=",",
                       header=header, comments="")


# ---------------------------------------------------------------------------
# structural operations
# ---------------------------------------------------------------------------

def reflect(f):
    """The profile t -> f(b - t) on the same domain."""
    pieces = [ReflectPiece((f.b - p.interval[1], f.b - p.interval[0]), p, f.b)
              for p in reversed(f.pieces)]
    return SmoothFn1D(f.b, pieces, f.junction_tolerance, f.junction_orders)


def scale(f, a):
    """The profile a * f."""
    pieces = [LinCombPiece(p.interval, [(a, p)]) for p in f.pieces]
    return SmoothFn1D(f.b, pieces, f.junction_tolerance, f.junction_orders)


def _piece_at(f, t):
    idx = int(np.searchsorted(f._breaks, t, side="right"))
    return f.pieces[idx]


def linear_homotopy(f0, f1, s):
    """(1-s) * f0 + s * f1 on the shared domain.

    Membership in any of the convex families is preserved for every s in
    [0, 1] whenever both endpoints are members.
    """
    if abs(f0.b - f1.b) > 1e-9 * max(1.0, f0.b):
        raise DomainMismatchError(
            f"domain lengths differ: {f0.b} vs {f1.b}")
    s = float(s)
    breaks = np.union1d(
        np.concatenate([[0.0], f0._breaks, [f0.b]]),
        np.concatenate([[0.0], f1._breaks, [f1.b]]))
    pieces = []
    for a, c in zip(breaks, breaks[1:]):
        if c - a <= 1e-14 * max(1.0, f0.b):
            continue
        mid = 0.5 * (a + c)
        pieces.append(LinCombPiece(
            (a, c), [(1.0 - s, _piece_at(f0, mid)), (s, _piece_at(f1, mid))]))
    tol = max(f0.junction_tolerance, f1.junction_tolerance)
    orders = tuple(sorted(set(f0.junction_orders) & set(f1.junction_orders)))
    return SmoothFn1D(f0.b, pieces, tol, orders)


# ---------------------------------------------------------------------------
# torpedo constructors
# ---------------------------------------------------------------------------

@dataclass
class TorpedoSpec:
    """Cap radius, straight tube length, and the C^2 blend window half-width.

    Total domain length is  delta*pi/2 + blend_width + tube_length.  The
    profile follows delta*sin(t/delta) up to delta*pi/2 - 2*blend_width, is
    the constant delta from delta*pi/2 + blend_width onward, and is a quintic
    interpolant in between (matched to order 2 at both ends).  The 2:1 window
    split is what keeps the interpolant concave; a symmetric window overshoots.

    ``blend_width = 0`` is accepted and produces the classical merely-C^1
    cap/tube junction.
    """

    delta: float
    tube_length: float = 1.0
    blend_width: float | None = None

    def __post_init__(self):
        if self.delta <= 0:
            raise InvalidSpecError("delta must be positive")
        if self.tube_length < 0:
            raise InvalidSpecError("tube_length must be nonnegative")
        if self.blend_width is None:
            self.blend_width = 0.25 * self.delta * np.pi / 2.0
        if self.blend_width < 0:
            raise InvalidSpecError("blend_width must be nonnegative")
        if self.blend_width >= 0.499 * self.delta * np.pi / 2.0:
            raise InvalidSpecError("blend_width must be below delta*pi/4")

    @property
    def b(self):
        return self.delta * np.pi / 2.0 + self.blend_width + self.tube_length


def _quintic_match(t0, y0, t1, y1):
    """Quintic polynomial matching (value, d1, d2) = y0 at t0 and y1 at t1.

    Coefficients are returned in powers of (t - t0).
    """
    h = t1 - t0
    fact = [1.0, 1.0, 2.0]
    rows = []
    rhs = []
    for k in range(3):
        row = np.zeros(6)
        row[k] = fact[k]
        rows.append(row)
        rhs.append(y0[k])
    for k in range(3):
        row = np.zeros(6)
        for j in range(k, 6):
            c = 1.0
            for m in range(k):
                c *= (j - m)
            row[j] = c * h ** (j - k)
        rows.append(row)
        rhs.append(y1[k])
    coeffs = np.linalg.solve(np.array(rows), np.array(rhs))
    return coeffs


def make_torpedo(spec):
    """Cap/tube profile: sine cap of radius delta, constant tube, quintic blend.

    The result is concave (d2 <= 0), which is verified on a dense grid.
    """
    if not isinstance(spec, TorpedoSpec):
        raise InvalidSpecError("make_torpedo expects a TorpedoSpec")
    d = spec.delta
    w = spec.blend_width
    cap = d * np.pi / 2.0
    b = spec.b
    pieces = []
    # a blend window below working precision degenerates to the C^1 junction
    if w < 1e-9 * cap:
        w = 0.0
    if w == 0.0:
        pieces.append(SinePiece((0.0, cap), d, 1.0 / d))
        if b > cap:
            pieces.append(ConstPiece((cap, b), d))
        f = SmoothFn1D(b, pieces, junction_orders=(0, 1))
    else:
        ts, te = cap - 2.0 * w, cap + w
        y0 = (d * np.sin(ts / d), np.cos(ts / d), -np.sin(ts / d) / d)
        coeffs = _quintic_match(ts, y0, te, (d, 0.0, 0.0))
        pieces.append(SinePiece((0.0, ts), d, 1.0 / d))
        pieces.append(PolyPiece((ts, te), coeffs, origin=ts))
        if b > te:
            pieces.append(ConstPiece((te, b), d))
        f = SmoothFn1D(b, pieces)
    # verification grid: concavity and monotonicity
    t = sample_grid(b)
    if f.d2(t).max() > 1e-10:
        raise ConstructionFailedError(
            f"blend lost concavity: max d2 = {f.d2(t).max():.3e}")
    if f.d1(t).min() < -1e-10:
        raise ConstructionFailedError("torpedo profile must be nondecreasing")
    return f


def make_double_torpedo(delta, b, blend_width=None):
    """Mirror-symmetric profile: cap/tube on [0, b/2] reflected onto [b/2, b].

    Requires b/2 > delta*pi/2 so the cap fits in each half.
    """
    cap = delta * np.pi / 2.0
    if b / 2.0 <= cap:
        raise InvalidSpecError(
            f"domain too short: need b/2 > delta*pi/2 = {cap:.6g}, got b/2 = {b / 2.0:.6g}")
    avail = b / 2.0 - cap
    if blend_width is None:
        blend_width = min(0.5 * avail, 0.25 * cap)
    spec = TorpedoSpec(delta, tube_length=avail - blend_width,
                       blend_width=blend_width)
    half = make_torpedo(spec)
    assert abs(half.b - b / 2.0) < 1e-12 * max(1.0, b)
    mirrored = [ReflectPiece((b - p.interval[1], b - p.interval[0]), p, b)
                for p in reversed(half.pieces)]
    shifted = list(half.pieces) + mirrored
    return SmoothFn1D(b, shifted, half.junction_tolerance, half.junction_orders)


# ---------------------------------------------------------------------------
# membership predicates
# ---------------------------------------------------------------------------

@dataclass
class ConditionResult:
    name: str
    passed: bool | None  # None = representable order exhausted, unchecked
    detail: str = ""


@dataclass
class MembershipReport:
    space: str
    conditions: list = field(default_factory=list)

    def add(self, name, passed, detail=""):
        self.conditions.append(ConditionResult(name, passed, detail))

    @property
    def passed(self):
        return all(c.passed for c in self.conditions if c.passed is not None)

    def failures(self):
        return [c for c in self.conditions if c.passed is False]

    def __repr__(self):
        status = "pass" if self.passed else "FAIL"
        return f"<MembershipReport {self.space}: {status} ({len(self.conditions)} conditions)>"


def _near_end_windows(b, window_frac):
    w = window_frac * b
    lo = np.linspace(0.0, w, 33)[1:]        # exclude the endpoint itself
    hi = np.linspace(b - w, b, 33)[:-1]
    return lo, hi


def check_F_membership(f, grid_density=DEFAULT_GRID_DENSITY, end_tol=1e-8,
                       concavity_slack=1e-12, end_window=0.05):
    """Conditions for dt^2 + f^2 * (round fiber) to close smoothly at both ends.

    Endpoint derivative conditions are checked to the representable order
    (even orders 0 and 2, plus the strict sign of order 3); higher orders are
    recorded as unchecked.
    """
    b = f.b
    rep = MembershipReport("F(0,%g)" % b)
    rep.add("f(0)=0", abs(float(f(0.0))) <= end_tol, f"value {float(f(0.0)):.3e}")
    rep.add("f(b)=0", abs(float(f(b))) <= end_tol, f"value {float(f(b)):.3e}")
    rep.add("d1(0)=1", abs(float(f.d1(0.0)) - 1.0) <= end_tol,
            f"value {float(f.d1(0.0)):.6g}")
    rep.add("d1(b)=-1", abs(float(f.d1(b)) + 1.0) <= end_tol,
            f"value {float(f.d1(b)):.6g}")
    rep.add("d2(0)=0", abs(float(f.d2(0.0))) <= end_tol)
    rep.add("d2(b)=0", abs(float(f.d2(b))) <= end_tol)
    rep.add("even derivatives of order >= 4 at ends", None,
            "beyond representable order")
    t = sample_grid(b, grid_density)
    m = float(f.d2(t).max())
    rep.add("d2 <= 0 on grid", m <= concavity_slack, f"max d2 = {m:.3e}")
    rep.add("d3(0) < 0", float(f.d3(0.0)) < 0.0, f"value {float(f.d3(0.0)):.6g}")
    rep.add("d3(b) > 0", float(f.d3(b)) > 0.0, f"value {float(f.d3(b)):.6g}")
    lo, hi = _near_end_windows(b, end_window)
    rep.add("d2 < 0 near 0", bool((f.d2(lo) < 0).all()))
    rep.add("d2 < 0 near b", bool((f.d2(hi) < 0).all()))
    return rep


def check_U_membership(u, grid_density=DEFAULT_GRID_DENSITY, end_tol=1e-8,
                       concavity_slack=1e-12, end_window=0.05):
    """Conditions for a profile positive at 0 that closes a fiber at b."""
    b = u.b
    rep = MembershipReport("U(0,%g)" % b)
    rep.add("u(0) > 0", float(u(0.0)) > 0.0, f"value {float(u(0.0)):.6g}")
    rep.add("d1(0)=0", abs(float(u.d1(0.0))) <= end_tol)
    rep.add("d3(0)=0", abs(float(u.d3(0.0))) <= end_tol)
    rep.add("odd derivatives of order >= 5 at 0", None,
            "beyond representable order")
    rep.add("u(b)=0", abs(float(u(b))) <= end_tol, f"value {float(u(b)):.3e}")
    rep.add("d1(b)=-1", abs(float(u.d1(b)) + 1.0) <= end_tol,
            f"value {float(u.d1(b)):.6g}")
    rep.add("d2(b)=0", abs(float(u.d2(b))) <= end_tol)
    rep.add("even derivatives of order >= 4 at b", None,
            "beyond representable order")
    t = sample_grid(b, grid_density)
    m = float(u.d2(t).max())
    rep.add("d2 <= 0 on grid", m <= concavity_slack, f"max d2 = {m:.3e}")
    _, hi = _near_end_windows(b, end_window)
    rep.add("d2 < 0 near b", bool((u.d2(hi) < 0).all()))
    rep.add("d3(b) > 0", float(u.d3(b)) > 0.0, f"value {float(u.d3(b)):.6g}")
    return rep


def check_V_membership(v, grid_density=DEFAULT_GRID_DENSITY, end_tol=1e-8,
                       concavity_slack=1e-12, end_window=0.05):
    """Mirror of ``check_U_membership``: closes at 0, positive at b."""
    b = v.b
    rep = MembershipReport("V(0,%g)" % b)
    rep.add("v(0)=0", abs(float(v(0.0))) <= end_tol, f"value {float(v(0.0)):.3e}")
    rep.add("d1(0)=1", abs(float(v.d1(0.0)) - 1.0) <= end_tol,
            f"value {float(v.d1(0.0)):.6g}")
    rep.add("d2(0)=0", abs(float(v.d2(0.0))) <= end_tol)
    rep.add("even derivatives of order >= 4 at 0", None,
            "beyond representable order")
    rep.add("v(b) > 0", float(v(b)) > 0.0, f"value {float(v(b)):.6g}")
    rep.add("d1(b)=0", abs(float(v.d1(b))) <= end_tol)
    rep.add("d3(b)=0", abs(float(v.d3(b))) <= end_tol)
    rep.add("odd derivatives of order >= 5 at b", None,
            "beyond representable order")
    t = sample_grid(b, grid_density)
    m = float(v.d2(t).max())
    rep.add("d2 <= 0 on grid", m <= concavity_slack, f"max d2 = {m:.3e}")
    lo, _ = _near_end_windows(b, end_window)
    rep.add("d2 < 0 near 0", bool((v.d2(lo) < 0).all()))
    rep.add("d3(0) < 0", float(v.d3(0.0)) < 0.0, f"value {float(v.d3(0.0)):.6g}")
    return rep
