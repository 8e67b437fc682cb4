"""Synthesis and certification of the bending curve gamma.

The curve lives in the (t, r) half plane, starts on the r-axis pointing
straight down, bends twice (an initial small-angle bend, then a transition
back to horizontal), and finishes in a cap/tube ("torpedo") tail meeting the
t-axis.  Rotating the ambient product metric around it produces the surgery
metric; positivity of the induced scalar curvature reduces to a pointwise
inequality along the curve relating its curvature k, its height r, and the
angle theta of the outward normal against the horizontal.

The inequality ledger is, from strongest to weakest assumption:

* ``check_cureqn``   k (1 + C' r^2) < R0 r/sin(theta) + (q-1) sin(theta)/r
                     - C r sin(theta)   (always true when k <= 0)
* ``check_keqn``     k < sin(theta)/(2 r)   (valid for r <= r0, theta >= theta0)
* ``check_diffkeqn`` f'' < (1 + f'^2)/(2 f)  (the graph form of keqn)

Conventions (fixed throughout): unit-speed curves with tangent
T = (sin(theta), -cos(theta)); k = dtheta/ds is the standard planar signed
curvature; for a graph r = f(t) traversed with increasing t this gives
k = f''/(1 + f'^2)^(3/2) and sin(theta) = 1/sqrt(1 + f'^2).
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
from numpy.polynomial import polynomial as npoly
from scipy.integrate import cumulative_simpson
from scipy.interpolate import CubicSpline
from scipy.optimize import brentq

from .certify import IsotopyCertificate
from .errors import (AssemblyError, ConstructionFailedError, InvalidBendError,
                     InvalidSpecError, InversionError, NoFeasibleBendError,
                     OutOfRegimeError, TiltTooLargeError)
from .fnspace import (PolyPiece, SmoothFn1D, TorpedoSpec, _quintic_match,
                      make_torpedo, scale)

__all__ = [
    "BendConstants",
    "TransitionParams",
    "Curve2D",
    "LineSeg",
    "ArcSeg",
    "BumpSeg",
    "GraphSeg",
    "BendProfile",
    "rhs_cureqn",
    "check_cureqn",
    "check_keqn",
    "check_diffkeqn",
    "mu_inequality",
    "initial_bend",
    "synth_transition",
    "assemble_gamma",
    "default_tail_spec",
    "initial_isotopy",
    "final_bending_tilt",
    "final_isotopy",
    "InverseBlend",
    "quarter_bend_curve",
    "write_bend_csv",
]


@dataclass
class BendConstants:
    """Constants entering the curve inequality.

    R0 is (inf of the ambient scalar curvature)/(2q); C bounds the O(1)
    ambient correction, Cp the O(r) one (both zero in the exact product
    model); q >= 2 is the fiber sphere dimension (codimension >= 3).
    """

    R0: float
    C: float = 0.0
    Cp: float = 0.0
    q: int = 2

    def __post_init__(self):
        if self.q < 2:
            raise InvalidSpecError("q must be >= 2 (codimension >= 3)")
        if self.R0 < 0 or self.C < 0 or self.Cp < 0:
            raise InvalidSpecError("R0, C, Cp must be nonnegative")

    def r0_bound(self):
        """Upper bound on r0 for the keqn regime: min(1/sqrt(4C), 1/sqrt(2C'))."""
        vals = []
        if self.C > 0:
            vals.append(1.0 / np.sqrt(4.0 * self.C))
        if self.Cp > 0:
            vals.append(1.0 / np.sqrt(2.0 * self.Cp))
        return min(vals) if vals else np.inf


# ---------------------------------------------------------------------------
# the inequality ledger
# ---------------------------------------------------------------------------

def rhs_cureqn(consts, r, theta):
    """R0 r/sin(theta) + (q-1) sin(theta)/r - C r sin(theta); +inf at theta=0."""
    r = np.asarray(r, dtype=float)
    theta = np.asarray(theta, dtype=float)
    s = np.sin(theta)
    with np.errstate(divide="ignore"):
        out = np.where(
            s == 0.0, np.inf,
            consts.R0 * r / np.where(s == 0.0, 1.0, s)
            + (consts.q - 1) * s / r - consts.C * r * s)
    if out.ndim == 0:
        return float(out)
    return out


def check_cureqn(consts, k, r, theta):
    """Margin of the curve inequality; pass iff > 0.

    Concave-down data (k <= 0) always passes and reports +inf.
    """
    k = np.asarray(k, dtype=float)
    lhs = k * (1.0 + consts.Cp * np.asarray(r, dtype=float) ** 2)
    margin = rhs_cureqn(consts, r, theta) - lhs
    margin = np.where(k <= 0.0, np.inf, margin)
    if margin.ndim == 0:
        return float(margin)
    return margin


def check_keqn(k, r, theta, consts, r0, theta0):
    """k < sin(theta)/(2r), valid only for r in (0, r0] with theta >= theta0."""
    if not 0 < r0 < consts.r0_bound():
        raise OutOfRegimeError(
            f"r0 = {r0} outside (0, {consts.r0_bound():.6g})")
    r = float(r)
    theta = float(theta)
    if not 0 < r <= r0:
        raise OutOfRegimeError(f"r = {r} outside (0, r0 = {r0}]")
    if theta < theta0:
        raise OutOfRegimeError(f"theta = {theta} below theta0 = {theta0}")
    return float(k) < np.sin(theta) / (2.0 * r)


def check_diffkeqn(f, grid=None):
    """Min over the grid of (1 + f'^2)/(2 f) - f''; pass iff > 0."""
    if grid is None:
        grid = np.linspace(0.0, f.b, 10001)
    grid = np.asarray(grid, dtype=float)
    F = f(grid)
    if np.min(F) <= 0:
        raise InvalidSpecError("profile must be positive on the grid")
    return float(np.min((1.0 + f.d1(grid) ** 2) / (2.0 * F) - f.d2(grid)))


def mu_inequality(mu, b):
    """mu^3 b - mu b - mu + 1; nonnegative on [0,1] x [0, 1/4), zero at mu=1."""
    mu = np.asarray(mu, dtype=float)
    b = np.asarray(b, dtype=float)
    return mu ** 3 * b - mu * b - mu + 1.0


# ---------------------------------------------------------------------------
# curve segments
# ---------------------------------------------------------------------------

class LineSeg:
    kind = "line"

    def __init__(self, p0, p1):
        self.p0 = np.asarray(p0, dtype=float)
        self.p1 = np.asarray(p1, dtype=float)
        d = self.p1 - self.p0
        self.length = float(np.linalg.norm(d))
        if self.length <= 0:
            raise InvalidSpecError("degenerate line segment")
        self.dir = d / self.length

    def eval(self, s):
        return self.p0 + np.multiply.outer(np.asarray(s, dtype=float),
                                           self.dir), \
            np.broadcast_to(self.dir, np.shape(s) + (2,)), \
            np.zeros(np.shape(s))

    def to_json(self):
        return {"kind": self.kind, "p0": self.p0.tolist(),
                "p1": self.p1.tolist()}


class ArcSeg:
    """Circular arc; ``ccw`` decides the traversal (and the curvature sign)."""

    kind = "arc"

    def __init__(self, center, radius, ang0, ang1):
        self.center = np.asarray(center, dtype=float)
        self.radius = float(radius)
        self.ang0 = float(ang0)
        self.ang1 = float(ang1)
        if self.radius <= 0 or self.ang0 == self.ang1:
            raise InvalidSpecError("degenerate arc")
        self.length = self.radius * abs(self.ang1 - self.ang0)
        self.orient = 1.0 if self.ang1 > self.ang0 else -1.0

    def eval(self, s):
        ang = self.ang0 + self.orient * np.asarray(s, dtype=float) / self.radius
        pt = self.center + self.radius * np.stack(
            [np.cos(ang), np.sin(ang)], axis=-1)
        tan = self.orient * np.stack([-np.sin(ang), np.cos(ang)], axis=-1)
        k = np.full(np.shape(s), self.orient / self.radius)
        return pt, tan, k

    def to_json(self):
        return {"kind": self.kind, "center": self.center.tolist(),
                "radius": self.radius, "ang0": self.ang0, "ang1": self.ang1}


class BumpSeg:
    """Curvature-defined segment: raised-cosine curvature bump.

    k(s) = k_max (1 - cos(2 pi s / L)) / 2 on [0, L]; the turning angle is
    theta(s) = k_max/2 (s - (L/2 pi) sin(2 pi s/L)), total k_max L / 2.
    Starting tangent is (sin theta_in, -cos theta_in); positions come from a
    dense Simpson integration of the tangent (spline-interpolated).
    """

    kind = "bump"

    def __init__(self, start, theta_in, k_max, length, density=32768):
        self.start = np.asarray(start, dtype=float)
        self.theta_in = float(theta_in)
        self.k_max = float(k_max)
        self.length = float(length)
        if self.length <= 0 or self.k_max < 0:
            raise InvalidSpecError("bump needs positive length, k_max >= 0")
        n = max(int(np.ceil(self.length * density)) | 1, 257)
        s = np.linspace(0.0, self.length, n)
        th = self.theta_in + self._theta_local(s)
        t = self.start[0] + cumulative_simpson(np.sin(th), x=s, initial=0.0)
        r = self.start[1] - cumulative_simpson(np.cos(th), x=s, initial=0.0)
        self._t = CubicSpline(s, t)
        self._r = CubicSpline(s, r)

    def _theta_local(self, s):
        L = self.length
        return 0.5 * self.k_max * (s - (L / (2 * np.pi))
                                   * np.sin(2 * np.pi * s / L))

    def theta(self, s):
        return self.theta_in + self._theta_local(np.asarray(s, dtype=float))

    def eval(self, s):
        s = np.asarray(s, dtype=float)
        th = self.theta(s)
        pt = np.stack([self._t(s), self._r(s)], axis=-1)
        tan = np.stack([np.sin(th), -np.cos(th)], axis=-1)
        k = 0.5 * self.k_max * (1.0 - np.cos(2 * np.pi * s / self.length))
        return pt, tan, k

    @property
    def end(self):
        return np.array([float(self._t(self.length)),
                         float(self._r(self.length))])

    def to_json(self):
        return {"kind": self.kind, "start": self.start.tolist(),
                "theta_in": self.theta_in, "k_max": self.k_max,
                "length": self.length}


class GraphSeg:
    """Arc-length parameterization of the graph r = prof(t - t_offset).

    ``prof`` is any object with __call__/d1/d2 and a domain attribute ``b``;
    the segment covers t in [t_offset + a, t_offset + b_local].
    """

    kind = "graph"

    def __init__(self, prof, t_offset=0.0, t_range=None, density=2048):
        self.prof = prof
        self.t_offset = float(t_offset)
        if t_range is None:
            t_range = (0.0, prof.b)
        self.t_range = (float(t_range[0]), float(t_range[1]))
        a, bb = self.t_range
        if not bb > a:
            raise InvalidSpecError("empty graph range")
        n = max(int(np.ceil((bb - a) * density)) | 1, 4097)
        tl = np.linspace(a, bb, n)
        speed = np.sqrt(1.0 + self.prof.d1(tl) ** 2)
        S = cumulative_simpson(speed, x=tl, initial=0.0)
        self.length = float(S[-1])
        self._S = CubicSpline(tl, S)
        self._tl = tl

    def _t_of_s(self, s):
        s = np.atleast_1d(np.asarray(s, dtype=float))
        out = np.empty_like(s)
        a, bb = self.t_range
        for i, sv in enumerate(s):
            sv = min(max(sv, 0.0), self.length)
            if sv <= 0.0:
                out[i] = a
            elif sv >= self.length:
                out[i] = bb
            else:
                out[i] = brentq(lambda t: self._S(t) - sv, a, bb,
                                xtol=1e-14, rtol=1e-15)
        return out

    def eval(self, s):
        shape = np.shape(s)
        tl = self._t_of_s(s)
        F = self.prof(tl)
        d1 = self.prof.d1(tl)
        d2 = self.prof.d2(tl)
        sp = np.sqrt(1.0 + d1 ** 2)
        pt = np.stack([tl + self.t_offset, F], axis=-1)
        tan = np.stack([1.0 / sp, d1 / sp], axis=-1)
        k = d2 / sp ** 3
        if shape == ():
            return pt[0], tan[0], k[0]
        return pt, tan, k

    def to_json(self):
        d = {"kind": self.kind, "t_offset": self.t_offset,
             "t_range": list(self.t_range)}
        if hasattr(self.prof, "to_json"):
            d["profile"] = self.prof.to_json()
        return d


class Curve2D:
    """Unit-speed piecewise curve in the (t, r) plane."""

    def __init__(self, segments):
        self.segments = list(segments)
        if not self.segments:
            raise InvalidSpecError("need at least one segment")
        self.cum = np.concatenate(
            [[0.0], np.cumsum([seg.length for seg in self.segments])])
        self.length = float(self.cum[-1])

    def _locate(self, s):
        s = np.atleast_1d(np.asarray(s, dtype=float))
        idx = np.clip(np.searchsorted(self.cum, s, side="right") - 1,
                      0, len(self.segments) - 1)
        return s, idx

    def eval(self, s):
        shape = np.shape(s)
        sv, idx = self._locate(s)
        pt = np.empty(sv.shape + (2,))
        tan = np.empty(sv.shape + (2,))
        k = np.empty(sv.shape)
        for i, seg in enumerate(self.segments):
            mask = idx == i
            if mask.any():
                p, tg, kk = seg.eval(sv[mask] - self.cum[i])
                pt[mask], tan[mask], k[mask] = p, tg, kk
        if shape == ():
            return pt[0], tan[0], k[0]
        return pt, tan, k

    def point(self, s):
        return self.eval(s)[0]

    def theta(self, s):
        """Normal angle against the horizontal: theta = atan2(t', -r')."""
        _, tan, _ = self.eval(s)
        return np.arctan2(tan[..., 0], -tan[..., 1])

    def unit_speed_residual(self, n_samples=1000, h=1e-6):
        s = np.linspace(2 * h, self.length - 2 * h, n_samples)
        # skip samples straddling segment junctions, where the FD is biased
        keep = np.ones(len(s), dtype=bool)
        for c in self.cum[1:-1]:
            keep &= np.abs(s - c) > 3 * h
        s = s[keep]
        # fourth-order stencil: small-radius caps have position derivatives
        # growing like 1/r^3, so a second-order difference is too noisy
        d = (-self.point(s + 2 * h) + 8 * self.point(s + h)
             - 8 * self.point(s - h) + self.point(s - 2 * h)) / (12.0 * h)
        return float(np.abs(np.linalg.norm(d, axis=-1) - 1.0).max())

    def junction_residual(self):
        worst = 0.0
        for i in range(len(self.segments) - 1):
            pa, ta, _ = self.segments[i].eval(self.segments[i].length)
            pb, tb, _ = self.segments[i + 1].eval(0.0)
            worst = max(worst, float(np.abs(pa - pb).max()),
                        float(np.abs(ta - tb).max()))
        return worst

    def to_json(self):
        return {"length": self.length,
                "segments": [seg.to_json() for seg in self.segments]}


# ---------------------------------------------------------------------------
# bend profile
# ---------------------------------------------------------------------------

@dataclass
class BendProfile:
    """The full bending curve with its landmarks and certification data."""

    curve: Curve2D
    consts: BendConstants
    theta0: float
    landmarks: dict
    certificate: IsotopyCertificate = None

    REQUIRED = ("r_bar", "r1", "r1p", "r0", "r_inf",
                "t1p", "t0", "t_inf", "t_bar")

    def __post_init__(self):
        lm = self.landmarks
        missing = [k for k in self.REQUIRED if k not in lm]
        if missing:
            raise AssemblyError(f"missing landmarks: {missing}")
        r_order = (0.0, lm["r_inf"], lm["r0"], lm["r1"] / 2.0,
                   lm["r1p"], lm["r1"], lm["r_bar"])
        if not all(a < b for a, b in zip(r_order, r_order[1:])):
            raise AssemblyError(f"r-landmark ordering violated: {r_order}")
        t_order = (0.0, lm["t1p"], lm["t0"], lm["t_inf"], lm["t_bar"])
        if not all(a < b for a, b in zip(t_order, t_order[1:])):
            raise AssemblyError(f"t-landmark ordering violated: {t_order}")
        if lm["t_bar"] - lm["t_inf"] < 10.0 * lm["r_inf"] - 1e-12:
            raise AssemblyError(
                "tail too short: t_bar - t_inf must be >= 10 r_inf")
        start = self.curve.point(0.0)
        if abs(start[0]) > 1e-9 or abs(start[1] - lm["r_bar"]) > 1e-9:
            raise AssemblyError(f"curve must start at (0, r_bar), got {start}")
        if abs(float(self.curve.theta(0.0))) > 1e-9:
            raise AssemblyError("curve must start vertical (theta = 0)")
        end = self.curve.point(self.curve.length)
        if abs(end[0] - lm["t_bar"]) > 1e-8 or abs(end[1]) > 1e-8:
            raise AssemblyError(f"curve must end at (t_bar, 0), got {end}")

    def margins(self, n_samples=10000):
        """(s, t, r, k, theta, margin) arrays along the curve."""
        s = np.linspace(0.0, self.curve.length, n_samples)
        pt, tan, k = self.curve.eval(s)
        theta = np.arctan2(tan[:, 0], -tan[:, 1])
        r = pt[:, 1]
        # the closing point r = 0 is the smooth tip of the cap (k < 0 there,
        # which passes unconditionally); avoid 0/0 in the rhs
        r = np.maximum(r, 1e-300)
        margin = check_cureqn(self.consts, k, r, theta)
        return s, pt[:, 0], r, k, theta, margin

    def certify(self, n_samples=10000, tolerance=0.0):
        s, t, r, k, theta, margin = self.margins(n_samples)
        finite = margin[np.isfinite(margin)]
        mn = float(finite.min()) if finite.size else np.inf
        self.certificate = IsotopyCertificate(
            grid=f"{n_samples} arc-length samples",
            min_scalar=mn, tolerance=tolerance, label="curve inequality")
        return self.certificate

    def to_json(self):
        return {"curve": self.curve.to_json(), "theta0": self.theta0,
                "landmarks": dict(self.landmarks),
                "constants": {"R0": self.consts.R0, "C": self.consts.C,
                              "Cp": self.consts.Cp, "q": self.consts.q}}


def write_bend_csv(profile, path_or_buf, n_samples=2048):
    """CSV emission of (s, t, r, k, theta, margin) along the curve."""
    cols = np.column_stack(profile.margins(n_samples))
    header = "s,t,r,k,theta,margin"
    if hasattr(path_or_buf, "write"):
        np.savetxt(path_or_buf, cols, fmt="%.17g", delimiter=",",
                   header=header, comments="")
    else:
        with open(path_or_buf, "w") as fh:
            np.savetxt(fh, cols, fmt="%.17g", delimiter=",",
                       header=header, comments="")


# ---------------------------------------------------------------------------
# the initial bend
# ---------------------------------------------------------------------------

def initial_bend(consts, r1, r_bar=None, budget=40, n_check=2001):
    """Bend the vertical line to a small angle theta0 with a curvature bump.

    The bump k(s) = k_max (1 - cos(4 pi s / r1))/2 has support length r1/2
    and integral k_max r1/4 = theta0.  theta0 starts at the largest value
    allowed by the arcsin(sqrt(R0/C)) bound and tan^2(theta0) < 1/4, and is
    halved until the curve inequality holds with positive margin along the
    bump.  Returns (prefix curve, theta0, k_max).
    """
    if consts.R0 <= 0:
        raise NoFeasibleBendError(
            "R0 must be strictly positive: with R0 = 0 no bend angle "
            "can satisfy the curve inequality near theta = 0")
    if r1 <= 0:
        raise InvalidSpecError("r1 must be positive")
    if r_bar is None:
        r_bar = 1.25 * r1
    if r_bar <= r1:
        raise InvalidSpecError("need r_bar > r1")
    cap = np.arctan(0.5) * 0.99  # tan^2(theta0) < 1/4
    if consts.C > 0:
        cap = min(cap, 0.99 * np.arcsin(min(1.0, np.sqrt(consts.R0 / consts.C))))
    theta0 = cap
    last = None
    for _ in range(budget):
        k_max = 4.0 * theta0 / r1
        bump = BumpSeg((0.0, r1), 0.0, k_max, r1 / 2.0)
        s = np.linspace(0.0, bump.length, n_check)
        pt, tan, k = bump.eval(s)
        theta = np.arctan2(tan[:, 0], -tan[:, 1])
        margin = check_cureqn(consts, k, pt[:, 1], theta)
        finite = margin[np.isfinite(margin)]
        if pt[:, 1].min() > 0 and (finite.size == 0 or finite.min() > 0):
            prefix = Curve2D([LineSeg((0.0, r_bar), (0.0, r1)), bump])
            return prefix, theta0, k_max
        last = float(finite.min()) if finite.size else None
        theta0 *= 0.5
    raise NoFeasibleBendError(
        f"no feasible bend angle after {budget} halvings "
        f"(last margin {last})")


# ---------------------------------------------------------------------------
# the transition function
# ---------------------------------------------------------------------------

@dataclass
class TransitionParams:
    r0: float
    m0: float
    delta0: float
    delta_inf: float
    C1: float
    C2: float
    c: float
    t0: float
    t0p: float
    tinfp: float
    tinf: float

    def __post_init__(self):
        if not (self.C1 > 0 and self.C2 > 0):
            raise InvalidSpecError("C1 and C2 must be positive")
        if not 0 < self.c < 1.0 / self.C1:
            raise InvalidSpecError("need c in (0, 1/C1)")
        resid = (self.C1 * (self.r0 - self.c) - self.m0 ** 2
                 + 0.5 * self.C1 * self.delta0 * self.m0
                 + self.C1 ** 2 * self.delta0 ** 2 / 48.0)
        if abs(resid) > 1e-10:
            raise InvalidSpecError(
                f"parameter equation residual too large: {resid:.3e}")


def _transition_pieces(p):
    """The three polynomial pieces on [t0, t0'], [t0', tinf'], [tinf', tinf]."""
    c1 = p.C1
    piece1 = PolyPiece((p.t0, p.t0p),
                       [p.r0, p.m0, 0.0, c1 / (12.0 * p.delta0)],
                       origin=p.t0)
    # parabola c + (C1/4)(t - C2)^2, re-centered at t0'
    d = p.t0p - p.C2
    piece2 = PolyPiece((p.t0p, p.tinfp),
                       [p.c + 0.25 * c1 * d ** 2, 0.5 * c1 * d, 0.25 * c1],
                       origin=p.t0p)
    val_inf = p.c - c1 * p.delta_inf ** 2 / 48.0
    piece3 = PolyPiece((p.tinfp, p.tinf),
                       [val_inf, 0.0, 0.0, -c1 / (12.0 * p.delta_inf)],
                       origin=p.tinf)
    return [piece1, piece2, piece3]


def synth_transition(consts, r0, theta0, budget=30, n_check=10001):
    """Three-piece C^2 graph bending slope m0 = -1/tan(theta0) to horizontal.

    Pieces (cubic-in, parabola, cubic-out) are glued with C^2 junctions made
    automatic by the parameter equation

        C1 (r0 - c) - m0^2 + (C1/2) delta0 m0 + C1^2 delta0^2 / 48 = 0

    with c = 1/(2 C1).  delta0 and delta_inf are found by halving until the
    strict graph inequality f'' < (1 + f'^2)/(2 f) holds with positive margin
    and the profile stays positive.  The graph is parameterized from t0 = 0.

    Returns (TransitionParams, SmoothFn1D on (0, t_inf)).
    """
    bound = consts.r0_bound()
    if not 0 < r0 < bound:
        raise OutOfRegimeError(f"need r0 in (0, {bound:.6g}), got {r0}")
    if not 0 < theta0 < np.pi / 2:
        raise InvalidSpecError("theta0 must lie in (0, pi/2)")
    m0 = -1.0 / np.tan(theta0)
    delta0 = 0.5 * r0
    last_err = None
    for _ in range(budget):
        # positive root of (delta0^2/48) C1^2 + (r0 + delta0 m0/2) C1
        #                  - (1/2 + m0^2) = 0
        a2 = delta0 ** 2 / 48.0
        a1 = r0 + 0.5 * delta0 * m0
        a0 = -(0.5 + m0 ** 2)
        disc = a1 ** 2 - 4.0 * a2 * a0
        if disc <= 0:
            delta0 *= 0.5
            last_err = "no real C1 root"
            continue
        C1 = (-a1 + np.sqrt(disc)) / (2.0 * a2) if a2 > 0 \
            else -a0 / a1
        if C1 <= 0:
            delta0 *= 0.5
            last_err = "nonpositive C1 root"
            continue
        c = 1.0 / (2.0 * C1)
        t0 = 0.0
        t0p = t0 + delta0
        C2 = t0p - 2.0 * m0 / C1 - 0.5 * delta0
        delta_inf = delta0
        ok = False
        for _ in range(budget):
            tinfp = C2 - 0.5 * delta_inf
            tinf = C2 + 0.5 * delta_inf
            val_inf = c - C1 * delta_inf ** 2 / 48.0
            if tinfp <= t0p or val_inf <= 0:
                delta_inf *= 0.5
                last_err = "landmark ordering or positivity failed"
                continue
            params = TransitionParams(r0, m0, delta0, delta_inf, C1, C2, c,
                                      t0, t0p, tinfp, tinf)
            f = SmoothFn1D(tinf, _transition_pieces(params))
            grid = np.linspace(0.0, tinf, n_check)
            if f(grid).min() <= 0:
                delta_inf *= 0.5
                last_err = "profile lost positivity"
                continue
            margin = check_diffkeqn(f, grid)
            if margin > 0:
                ok = True
                break
            delta_inf *= 0.5
            last_err = f"diffkeqn margin {margin:.3e}"
        if ok:
            return params, f
        delta0 *= 0.5
    raise ConstructionFailedError(
        f"transition search exhausted: {last_err}")


# ---------------------------------------------------------------------------
# assembly
# ---------------------------------------------------------------------------

def default_tail_spec(params, factor=10.0):
    """Torpedo spec for the tail: cap radius r_inf = f(t_inf), tube >= factor*r_inf."""
    r_inf = params.c - params.C1 * params.delta_inf ** 2 / 48.0
    return TorpedoSpec(r_inf, tube_length=factor * r_inf)


class _ShiftedReflectedProfile:
    """r(t) = prof(b_total - t) for t in [0, b_total]; order-3 jet available."""

    def __init__(self, prof):
        self.prof = prof
        self.b = prof.b

    def __call__(self, t):
        return self.prof(self.b - np.asarray(t, dtype=float))

    def d1(self, t):
        return -self.prof.d1(self.b - np.asarray(t, dtype=float))

    def d2(self, t):
        return self.prof.d2(self.b - np.asarray(t, dtype=float))

    def d3(self, t):
        return -self.prof.d3(self.b - np.asarray(t, dtype=float))

    def to_json(self):
        return {"kind": "reflected", "of": self.prof.to_json()}


def assemble_gamma(consts, prefix, transition, tail_spec=None,
                   tail_factor=10.0, junction_tolerance=1e-8,
                   n_samples=10000):
    """Glue prefix bend, straight slope, transition graph, and torpedo tail.

    ``prefix`` is the (curve, theta0, k_max) output of initial_bend under
    ``consts``; ``transition`` the (params, f) output of synth_transition for
    the same theta0.  Returns a certified BendProfile.
    """
    curve_prefix, theta0, _k_max = prefix
    params, f = transition
    bump = curve_prefix.segments[-1]
    if not isinstance(bump, BumpSeg):
        raise AssemblyError("prefix must end in a curvature bump")
    p1 = bump.end
    t1p, r1p = float(p1[0]), float(p1[1])
    r1 = float(curve_prefix.segments[0].p1[1])
    r_bar = float(curve_prefix.segments[0].p0[1])
    r0 = params.r0
    if r1p <= r0:
        raise AssemblyError(
            f"bump already below r0: r1' = {r1p:.6g} <= r0 = {r0:.6g}")
    # straight stretch of angle theta0 down to the r0 level
    t0_global = t1p + (r1p - r0) * np.tan(theta0)
    line = LineSeg(p1, (t0_global, r0))
    if abs(float(bump.theta(bump.length)) - theta0) > 1e-9:
        raise AssemblyError("bump exit angle does not match theta0")
    # transition graph shifted to start at t0_global
    trans_seg = GraphSeg(f, t_offset=t0_global)
    t_inf_global = t0_global + params.tinf
    r_inf = float(f(params.tinf))
    if tail_spec is None:
        tail_spec = default_tail_spec(params, tail_factor)
    if abs(tail_spec.delta - r_inf) > junction_tolerance:
        raise AssemblyError(
            f"tail cap radius {tail_spec.delta:.8g} does not match "
            f"r_inf = {r_inf:.8g}")
    tail_prof = make_torpedo(tail_spec)
    if tail_prof.b < tail_factor * r_inf - 1e-12:
        raise AssemblyError(
            f"tail too short: need length >= {tail_factor} * r_inf")
    # the cap of the tail has feature size r_inf, so the arc-length table
    # needs a spacing well below that
    tail_density = max(2048.0, 8192.0 / r_inf)
    tail_seg = GraphSeg(_ShiftedReflectedProfile(tail_prof),
                        t_offset=t_inf_global, density=tail_density)
    t_bar = t_inf_global + tail_prof.b
    curve = Curve2D(list(curve_prefix.segments) + [line, trans_seg, tail_seg])
    if curve.junction_residual() > junction_tolerance:
        raise AssemblyError(
            f"segment junction residual {curve.junction_residual():.3e} "
            f"exceeds {junction_tolerance}")
    landmarks = {"r_bar": r_bar, "r1": r1, "r1p": r1p, "r0": r0,
                 "r_inf": r_inf, "t1p": t1p, "t0": t0_global,
                 "t_inf": t_inf_global, "t_bar": t_bar}
    profile = BendProfile(curve, consts, theta0, landmarks)
    cert = profile.certify(n_samples)
    if not cert.passed:
        raise AssemblyError(
            f"assembled curve fails the inequality: min margin "
            f"{cert.min_scalar:.3e}")
    return profile


# ---------------------------------------------------------------------------
# isotopies
# ---------------------------------------------------------------------------

def initial_isotopy(f0, lambda_grid=None, n_t=512):
    """Scale the bend graph: the family lambda * f0 for lambda in [0, 1].

    ``f0`` is the bend region viewed as a graph over the r-axis, so its slope
    is tan(theta) <= tan(theta0) and b = f0'^2 < 1/4.  Curvature does not
    increase anywhere along the family because

        mu^3 b - mu b - mu + 1 >= 0,   mu = lambda^(2/3),

    which is returned as the minimum over the (lambda, t) grid, along with
    the scaled family itself.
    """
    if lambda_grid is None:
        lambda_grid = np.linspace(0.0, 1.0, 11)
    t = np.linspace(0.0, f0.b, n_t)
    bvals = f0.d1(t) ** 2
    if bvals.max() >= 0.25:
        raise OutOfRegimeError(
            f"slope condition violated: max f0'^2 = {bvals.max():.6g} >= 1/4")
    mus = np.asarray(lambda_grid, dtype=float) ** (2.0 / 3.0)
    expr = mu_inequality(mus[:, None], bvals[None, :])
    family = [scale(f0, float(lam)) for lam in lambda_grid]
    return family, float(expr.min())


def final_bending_tilt(transition, t_inf_pp, extend_to=None,
                       n_check=4001, margin_slack=1e-9):
    """Straighten the transition tail from t_inf'' on, tilting it downward.

    The second derivative of f is cut off at t_inf'' (mollified over a window
    of width delta_inf/8 so the result is exactly C^2) and the profile
    continues as a straight line of small negative slope.  The graph
    inequality margin at matched r-levels must not drop below the unmodified
    margin by more than ``margin_slack``.

    With t_inf'' = t_inf the profile is returned unchanged.  By default the
    straight tail descends exactly to the original end value f(t_inf), so the
    tilted profile covers the same r-range as the input; ``extend_to``
    overrides the tail end, and if the line reaches zero the tilt is rejected.
    """
    params, f = transition
    if not params.C2 <= t_inf_pp <= params.tinf:
        raise InvalidSpecError(
            f"t_inf'' must lie in [C2, t_inf] = "
            f"[{params.C2:.6g}, {params.tinf:.6g}]")
    if t_inf_pp == params.tinf and extend_to is None:
        return f
    w = params.delta_inf / 8.0
    cut0 = t_inf_pp - w
    # rebuild the second derivative piecewise: untouched before cut0, scaled
    # to zero by a quintic across [cut0, t_inf''], zero afterwards
    sq = _quintic_match(cut0, (1.0, 0.0, 0.0), t_inf_pp, (0.0, 0.0, 0.0))
    new_d2 = []  # (a, b, coeffs-about-a) for the new f''
    for piece in f.pieces:
        a, bb = piece.interval
        if a >= t_inf_pp:
            continue
        d2c = npoly.polyder(piece.coeffs, 2)
        for lo, hi in ((a, min(bb, cut0)), (max(a, cut0), min(bb, t_inf_pp))):
            if hi - lo <= 1e-15:
                continue
            base = _shift_poly(d2c, piece.origin, lo)
            if lo >= cut0 - 1e-15:
                mol = _shift_poly(sq, cut0, lo)
                base = npoly.polymul(base, mol)
            new_d2.append((lo, hi, base))
    # integrate twice, carrying continuity from (r0, m0) at t = 0
    val, slope = params.r0, params.m0
    pieces = []
    for lo, hi, d2c in new_d2:
        d1c = npoly.polyint(d2c, 1, k=[slope])
        fc = npoly.polyint(d1c, 1, k=[val])
        pieces.append(PolyPiece((lo, hi), fc, origin=lo))
        h = hi - lo
        val = float(npoly.polyval(h, fc))
        slope = float(npoly.polyval(h, d1c))
    if slope >= 0 and t_inf_pp < params.tinf:
        raise ConstructionFailedError("tilted tail slope must be negative")
    if extend_to is not None:
        end = extend_to
    elif slope < 0:
        # descend to the original end value so the r-range is preserved
        end = t_inf_pp + (val - float(f(params.tinf))) / (-slope)
    else:
        end = t_inf_pp
    if end > t_inf_pp:
        pieces.append(PolyPiece((t_inf_pp, end), [val, slope],
                                origin=t_inf_pp))
    f_new = SmoothFn1D(end, pieces)
    grid = np.linspace(0.0, end, n_check)
    if f_new(grid).min() <= 0:
        raise TiltTooLargeError(
            "tilted profile loses positivity before the end of its domain")
    # margins compared at matched r-levels against the unmodified profile
    tm = np.linspace(0.0, min(t_inf_pp, end), 513)[1:-1]
    r_new = f_new(tm)
    m_new = (1.0 + f_new.d1(tm) ** 2) / (2.0 * r_new) - f_new.d2(tm)
    lo_r, hi_r = float(f(params.tinf)), params.r0
    for rv, mv in zip(r_new, m_new):
        if not lo_r < rv < hi_r:
            continue
        t_old = brentq(lambda t: float(f(t)) - rv, 0.0, params.tinf,
                       xtol=1e-13)
        m_old = float((1.0 + f.d1(t_old) ** 2) / (2.0 * f(t_old))
                      - f.d2(t_old))
        if mv < m_old - margin_slack * max(1.0, abs(m_old)):
            raise ConstructionFailedError(
                f"tilt decreased the graph-inequality margin at r = {rv:.6g}")
    return f_new


def _shift_poly(coeffs, origin_old, origin_new):
    """Re-express a polynomial in powers of (t - origin_new)."""
    # p(t) = sum c_k (t - o_old)^k = sum c_k ((t - o_new) + (o_new - o_old))^k
    shift = npoly.Polynomial([origin_new - origin_old, 1.0])
    out = npoly.Polynomial([0.0])
    for k, ck in enumerate(np.atleast_1d(coeffs)):
        out = out + ck * shift ** k
    return out.coef


class InverseBlend:
    """h_s with h_s^{-1} = (1-s) f^{-1} + s l^{-1} for strictly decreasing f.

    ``f`` decreases from r0 at t = 0; ``l`` is the line r0 + m0 t.  The blend
    of the inverses is itself a strictly decreasing function of r, inverted
    pointwise by bracketed root finding.  Exact derivative formulas:

        h'(t)  = 1 / hinv'(r)
        h''(t) = -hinv''(r) / hinv'(r)^3
        hinv'(r)  = (1-s)/f'(tau) + s/m0,        tau = f^{-1}(r)
        hinv''(r) = -(1-s) f''(tau)/f'(tau)^3.
    """

    def __init__(self, f, m0, s, r_floor_frac=1e-3):
        self.f = f
        self.m0 = float(m0)
        self.s = float(s)
        self.r0 = float(f(0.0))
        t = np.linspace(0.0, f.b, 4097)
        if f.d1(t).max() >= 0:
            raise InversionError("profile must be strictly decreasing")
        self.r_end = float(f(f.b))
        if self.r_end <= 0:
            self.r_end = self.r0 * r_floor_frac
        self.t_end_f = float(brentq(
            lambda tt: float(f(tt)) - self.r_end, 0.0, f.b, xtol=1e-14)) \
            if self.r_end > float(f(f.b)) else f.b
        # blended domain length
        self.b = (1.0 - self.s) * self.t_end_f \
            + self.s * (self.r_end - self.r0) / self.m0

    def _finv(self, r):
        return brentq(lambda t: float(self.f(t)) - r, 0.0, self.t_end_f,
                      xtol=1e-14)

    def _hinv(self, r):
        return (1.0 - self.s) * self._finv(r) \
            + self.s * (r - self.r0) / self.m0

    def _r_of_t(self, t):
        lo, hi = self.r_end, self.r0
        return brentq(lambda r: self._hinv(r) - t, lo, hi, xtol=1e-14)

    def _jet(self, t):
        t = float(min(max(t, 0.0), self.b))
        r = self._r_of_t(t)
        tau = self._finv(r)
        fp = float(self.f.d1(tau))
        fpp = float(self.f.d2(tau))
        hinv1 = (1.0 - self.s) / fp + self.s / self.m0
        hinv2 = -(1.0 - self.s) * fpp / fp ** 3
        return r, 1.0 / hinv1, -hinv2 / hinv1 ** 3

    def __call__(self, t):
        return self._vec(t, 0)

    def d1(self, t):
        return self._vec(t, 1)

    def d2(self, t):
        return self._vec(t, 2)

    def d3(self, t, h=1e-5):
        t = np.asarray(t, dtype=float)
        return (self._vec(np.minimum(t + h, self.b), 2)
                - self._vec(np.maximum(t - h, 0.0), 2)) / (2.0 * h)

    def _vec(self, t, order):
        t = np.asarray(t, dtype=float)
        if t.ndim == 0:
            return self._jet(float(t))[order]
        return np.array([self._jet(float(tv))[order] for tv in t])


def final_isotopy(f, l_line, s_grid=None, n_t=201):
    """Linear homotopy of inverses from the graph of f to its start line.

    ``l_line`` is the line r0 + m0*t through the start of f: either a pair
    (r0, m0) or anything with value/d1 callables.  Returns (list of h_s
    profiles, list of graph-inequality margins); h_0 reproduces f and h_1 is
    the line exactly.
    """
    if isinstance(l_line, (tuple, list)):
        r0_line, m0 = (float(x) for x in l_line)
    else:
        r0_line, m0 = float(l_line(0.0)), float(l_line.d1(0.0))
    if abs(r0_line - float(f(0.0))) > 1e-9:
        raise InvalidSpecError("line must pass through the start of f")
    if m0 >= 0:
        raise InversionError("line slope must be negative")
    if s_grid is None:
        s_grid = np.linspace(0.0, 1.0, 21)
    family = []
    margins = []
    for s in s_grid:
        h = InverseBlend(f, m0, float(s))
        t = np.linspace(0.0, h.b, n_t)[1:-1]
        vals = h(t)
        m = float(np.min((1.0 + h.d1(t) ** 2) / (2.0 * vals) - h.d2(t)))
        family.append(h)
        margins.append(m)
    return family, margins


# ---------------------------------------------------------------------------
# quarter bend (used by the embedding identities)
# ---------------------------------------------------------------------------

def quarter_bend_curve(c1, c2, bend_radius, eps=0.0, delta=0.0):
    """Unit-speed curve from (c1, 0) to (0, c2) in the first quadrant.

    Vertical line up to (c1, c2 - R), a quarter circular arc, then a
    horizontal line to the a2-axis.  With cap radii (eps, delta) declared,
    the straight pieces must clear the cap regions: c1 > eps pi/2,
    c2 > delta pi/2, and the bend must stay above the line a2 = delta pi/2.
    """
    R = float(bend_radius)
    if R <= 0:
        raise InvalidBendError("bend radius must be positive")
    if not (c1 > R and c2 > R):
        raise InvalidBendError("bend radius must fit inside the corner")
    if not c1 > eps * np.pi / 2.0:
        raise InvalidBendError("need c1 > eps*pi/2 (strict)")
    if not c2 > delta * np.pi / 2.0:
        raise InvalidBendError("need c2 > delta*pi/2 (strict)")
    if not c2 - R > delta * np.pi / 2.0:
        raise InvalidBendError(
            "bend must stay above the horizontal line a2 = delta*pi/2")
    segs = [
        LineSeg((c1, 0.0), (c1, c2 - R)),
        ArcSeg((c1 - R, c2 - R), R, 0.0, np.pi / 2.0),
        LineSeg((c1 - R, c2), (0.0, c2)),
    ]
    return Curve2D(segs)
