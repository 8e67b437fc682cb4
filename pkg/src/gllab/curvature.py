"""Closed-form curvature evaluators for rotationally symmetric metrics.

Three metric shapes are covered:

* ``WarpedSphereMetric``   dt^2 + f(t)^2 ds_{n-1}^2
* ``DoublyWarpedMetric``   dt^2 + u(t)^2 ds_p^2 + v(t)^2 ds_q^2
* ``CylFamilyMetric``      ds^2 + dt^2 + phi(s,t)^2 ds_q^2  (2-D base)

Scalar and Ricci curvature come from the standard warped-product formulas.
Where a warping function vanishes at a domain endpoint the 0/0 quotients are
replaced by their third-derivative limits, which removes all endpoint noise;
interior zeros raise ``SingularProfileError``.

``slowdown_concordance`` certifies that a path of psc warped metrics can be
run as a psc metric on a cylinder after slowing the parameter down enough
(reparameterize by a smoothstep over a long enough interval).
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .certify import IsotopyCertificate
from .errors import (CertificationFailedError, DomainMismatchError,
                     InvalidSpecError, SingularProfileError)
from .fnspace import (ConstPiece, PolyPiece, SmoothFn1D, _quintic_match,
                      check_F_membership, check_U_membership,
                      check_V_membership, sample_grid)

__all__ = [
    "WarpedSphereMetric",
    "DoublyWarpedMetric",
    "CylFamilyMetric",
    "Phi2D",
    "scalar_warped",
    "ricci_warped",
    "scalar_doubly_warped",
    "scalar_cyl_family",
    "slowdown_concordance",
    "canonical_variation_scalar",
    "make_smoothstep",
    "write_curvature_csv",
]

# below this fraction of the domain length an evaluation point counts as "at"
# an endpoint for the purpose of the l'Hospital limit formulas
_END_SNAP = 1e-12

# a warping function smaller than this away from the endpoints is treated as
# an interior zero
_INTERIOR_ZERO = 1e-13


@dataclass
class WarpedSphereMetric:
    """dt^2 + f(t)^2 ds_{n-1}^2 on (0, b).

    With ``open_profile=False`` the profile is required to close a round
    sphere smoothly at both ends; disk/cylinder profiles (tubes, caps, bend
    data) set ``open_profile=True`` and skip the membership gate.
    """

    n: int
    f: SmoothFn1D
    open_profile: bool = False

    def __post_init__(self):
        if self.n < 3:
            raise InvalidSpecError("sphere dimension n must be >= 3")
        if not self.open_profile:
            rep = check_F_membership(self.f)
            if not rep.passed:
                raise InvalidSpecError(
                    "profile fails closed-sphere membership: "
                    f"{[c.name for c in rep.failures()]}")

    @property
    def b(self):
        return self.f.b

    def to_json(self):
        return {"kind": "warped", "n": self.n, "open_profile": self.open_profile,
                "f": self.f.to_json()}


@dataclass
class DoublyWarpedMetric:
    """dt^2 + u^2 ds_p^2 + v^2 ds_q^2 on a shared (0, b), p + q + 1 = n."""

    p: int
    q: int
    u: SmoothFn1D
    v: SmoothFn1D
    open_profile: bool = False

    def __post_init__(self):
        if self.p < 0 or self.q < 0:
            raise InvalidSpecError("fiber dimensions must be nonnegative")
        if abs(self.u.b - self.v.b) > 1e-9 * max(1.0, self.u.b):
            raise DomainMismatchError(
                f"u and v domain lengths differ: {self.u.b} vs {self.v.b}")
        if not self.open_profile:
            ru = check_U_membership(self.u)
            rv = check_V_membership(self.v)
            if not (ru.passed and rv.passed):
                bad = [c.name for c in ru.failures() + rv.failures()]
                raise InvalidSpecError(
                    f"(u, v) fail smooth-sphere membership: {bad}")

    @property
    def n(self):
        return self.p + self.q + 1

    @property
    def b(self):
        return self.u.b

    def to_json(self):
        return {"kind": "doubly-warped", "p": self.p, "q": self.q,
                "open_profile": self.open_profile,
                "u": self.u.to_json(), "v": self.v.to_json()}


class Phi2D:
    """Positive function of (s, t) with first and second partials.

    The callables must be vectorized over equal-shaped arrays.  The mixed
    partial is never needed: the base (s, t) is flat, so only the Laplacian
    phi_ss + phi_tt and |grad phi|^2 = phi_s^2 + phi_t^2 enter the scalar
    curvature.
    """

    def __init__(self, value, ds, dt, dss, dtt):
        self.value = value
        self.ds = ds
        self.dt = dt
        self.dss = dss
        self.dtt = dtt

    @classmethod
    def from_profile(cls, f):
        """s-independent family: phi(s, t) = f(t)."""
        zero = lambda s, t: np.zeros_like(np.asarray(t, dtype=float))
        return cls(lambda s, t: f(t), zero, lambda s, t: f.d1(t),
                   zero, lambda s, t: f.d2(t))

    @classmethod
    def from_path(cls, profile_at, fd_step):
        """phi(s, t) = profile_at(s)(t), s-partials by central differences."""
        h = float(fd_step)

        def val(s, t):
            s = np.asarray(s, dtype=float)
            if s.ndim == 0:
                return profile_at(float(s))(t)
            out = np.empty(np.broadcast(s, t).shape)
            for i, sv in enumerate(np.atleast_1d(s)):
                out[i] = profile_at(float(sv))(t[i] if np.ndim(t) else t)
            return out

        def ds(s, t):
            return (val(s + h, t) - val(s - h, t)) / (2.0 * h)

        def dss(s, t):
            return (val(s + h, t) - 2.0 * val(s, t) + val(s - h, t)) / h ** 2

        def dt(s, t):
            s = np.asarray(s, dtype=float)
            if s.ndim == 0:
                return profile_at(float(s)).d1(t)
            out = np.empty(np.broadcast(s, t).shape)
            for i, sv in enumerate(np.atleast_1d(s)):
                out[i] = profile_at(float(sv)).d1(t[i] if np.ndim(t) else t)
            return out

        def dtt(s, t):
            s = np.asarray(s, dtype=float)
            if s.ndim == 0:
                return profile_at(float(s)).d2(t)
            out = np.empty(np.broadcast(s, t).shape)
            for i, sv in enumerate(np.atleast_1d(s)):
                out[i] = profile_at(float(sv)).d2(t[i] if np.ndim(t) else t)
            return out

        return cls(val, ds, dt, dss, dtt)


@dataclass
class CylFamilyMetric:
    """ds^2 + dt^2 + phi(s, t)^2 ds_qtilde^2 over a flat rectangle base."""

    qtilde: int
    phi: Phi2D

    def __post_init__(self):
        if self.qtilde < 1:
            raise InvalidSpecError("fiber sphere dimension must be >= 1")


# ---------------------------------------------------------------------------
# scalar / Ricci evaluation
# ---------------------------------------------------------------------------

def _endpoint_masks(f, t):
    snap = _END_SNAP * max(1.0, f.b)
    at0 = np.abs(t) <= snap
    atb = np.abs(t - f.b) <= snap
    return at0, atb


def scalar_warped(m, t):
    """Scalar curvature of dt^2 + f^2 ds_{n-1}^2 at t (scalar or array).

    R = -2(n-1) f''/f + (n-1)(n-2)(1 - f'^2)/f^2 in the interior; at an
    endpoint where f vanishes both quotients tend to (-+) f''' there, giving
    R(0) = -n(n-1) f'''(0) and R(b) = +n(n-1) f'''(b).
    """
    n, f = m.n, m.f
    t = np.asarray(t, dtype=float)
    scalar = (t.ndim == 0)
    tv = np.atleast_1d(t).astype(float)
    at0, atb = _endpoint_masks(f, tv)
    interior = ~(at0 | atb)
    F = f(tv)
    out = np.empty_like(tv)
    if interior.any():
        Fi = F[interior]
        if np.abs(Fi).min() < _INTERIOR_ZERO:
            raise SingularProfileError(
                "profile vanishes at an interior point")
        ti = tv[interior]
        d1, d2 = f.d1(ti), f.d2(ti)
        out[interior] = (-2.0 * (n - 1) * d2 / Fi
                         + (n - 1) * (n - 2) * (1.0 - d1 ** 2) / Fi ** 2)
    for mask, tend, sign in ((at0, 0.0, -1.0), (atb, f.b, 1.0)):
        if not mask.any():
            continue
        fe = float(f(tend))
        if abs(fe) <= 1e-9:
            out[mask] = sign * n * (n - 1) * float(f.d3(tend))
        else:
            d1, d2 = float(f.d1(tend)), float(f.d2(tend))
            out[mask] = (-2.0 * (n - 1) * d2 / fe
                         + (n - 1) * (n - 2) * (1.0 - d1 ** 2) / fe ** 2)
    return float(out[0]) if scalar else out


def ricci_warped(m, t):
    """(Ric(d/dt), Ric(sphere direction)) for the warped metric.

    Interior values are -(n-1) f''/f and (n-2)(1-f'^2)/f^2 - f''/f; at a
    vanishing endpoint both tend to (-+)(n-1) f''' there.
    """
    n, f = m.n, m.f
    t = np.asarray(t, dtype=float)
    scalar = (t.ndim == 0)
    tv = np.atleast_1d(t).astype(float)
    at0, atb = _endpoint_masks(f, tv)
    interior = ~(at0 | atb)
    F = f(tv)
    rt = np.empty_like(tv)
    rs = np.empty_like(tv)
    if interior.any():
        Fi = F[interior]
        if np.abs(Fi).min() < _INTERIOR_ZERO:
            raise SingularProfileError("profile vanishes at an interior point")
        ti = tv[interior]
        d1, d2 = f.d1(ti), f.d2(ti)
        rt[interior] = -(n - 1) * d2 / Fi
        rs[interior] = (n - 2) * (1.0 - d1 ** 2) / Fi ** 2 - d2 / Fi
    for mask, tend, sign in ((at0, 0.0, -1.0), (atb, f.b, 1.0)):
        if not mask.any():
            continue
        fe = float(f(tend))
        if abs(fe) <= 1e-9:
            lim = sign * (n - 1) * float(f.d3(tend))
            rt[mask] = lim
            rs[mask] = lim
        else:
            d1, d2 = float(f.d1(tend)), float(f.d2(tend))
            rt[mask] = -(n - 1) * d2 / fe
            rs[mask] = (n - 2) * (1.0 - d1 ** 2) / fe ** 2 - d2 / fe
    if scalar:
        return float(rt[0]), float(rs[0])
    return rt, rs


def scalar_doubly_warped(m, t):
    """Scalar curvature of dt^2 + u^2 ds_p^2 + v^2 ds_q^2 at t.

    Interior formula:

        R = -2p u''/u - 2q v''/v + p(p-1)(1-u'^2)/u^2
            + q(q-1)(1-v'^2)/v^2 - 2pq u'v'/(uv)

    At an endpoint where exactly one factor closes (v at 0, u at b) the 0/0
    quotients collapse to third-derivative limits; e.g. with v(0) = 0:

        R(0) = -2p(1+q) u''(0)/u(0) + p(p-1)/u(0)^2 - q(q+1) v'''(0).
    """
    p, q, u, v = m.p, m.q, m.u, m.v
    t = np.asarray(t, dtype=float)
    scalar = (t.ndim == 0)
    tv = np.atleast_1d(t).astype(float)
    at0, atb = _endpoint_masks(u, tv)
    interior = ~(at0 | atb)
    out = np.empty_like(tv)
    if interior.any():
        ti = tv[interior]
        U, V = u(ti), v(ti)
        if min(np.abs(U).min(), np.abs(V).min()) < _INTERIOR_ZERO:
            raise SingularProfileError(
                "a warping function vanishes at an interior point")
        u1, u2 = u.d1(ti), u.d2(ti)
        v1, v2 = v.d1(ti), v.d2(ti)
        out[interior] = (-2.0 * p * u2 / U - 2.0 * q * v2 / V
                         + p * (p - 1) * (1.0 - u1 ** 2) / U ** 2
                         + q * (q - 1) * (1.0 - v1 ** 2) / V ** 2
                         - 2.0 * p * q * u1 * v1 / (U * V))
    for mask, tend in ((at0, 0.0), (atb, u.b)):
        if not mask.any():
            continue
        ue, ve = float(u(tend)), float(v(tend))
        if abs(ve) <= 1e-9 and abs(ue) > 1e-9:
            # v closes here (t = 0 style end)
            out[mask] = (-2.0 * p * (1 + q) * float(u.d2(tend)) / ue
                         + p * (p - 1) * (1.0 - float(u.d1(tend)) ** 2) / ue ** 2
                         - q * (q + 1) * float(v.d3(tend)))
        elif abs(ue) <= 1e-9 and abs(ve) > 1e-9:
            # u closes here (t = b style end)
            out[mask] = (p * (p + 1) * float(u.d3(tend))
                         - 2.0 * q * (1 + p) * float(v.d2(tend)) / ve
                         + q * (q - 1) * (1.0 - float(v.d1(tend)) ** 2) / ve ** 2)
        elif abs(ue) > 1e-9 and abs(ve) > 1e-9:
            u1, u2 = float(u.d1(tend)), float(u.d2(tend))
            v1, v2 = float(v.d1(tend)), float(v.d2(tend))
            out[mask] = (-2.0 * p * u2 / ue - 2.0 * q * v2 / ve
                         + p * (p - 1) * (1.0 - u1 ** 2) / ue ** 2
                         + q * (q - 1) * (1.0 - v1 ** 2) / ve ** 2
                         - 2.0 * p * q * u1 * v1 / (ue * ve))
        else:
            raise SingularProfileError(
                "both warping functions vanish at the same endpoint")
    return float(out[0]) if scalar else out


def scalar_cyl_family(m, s, t):
    """Scalar curvature of ds^2 + dt^2 + phi^2 ds_qtilde^2 at (s, t).

    R = -2 qtilde (phi_ss + phi_tt)/phi
        + qtilde (qtilde - 1) (1 - phi_s^2 - phi_t^2)/phi^2.
    """
    qt = m.qtilde
    phi = m.phi
    s = np.asarray(s, dtype=float)
    t = np.asarray(t, dtype=float)
    P = phi.value(s, t)
    if np.min(np.abs(P)) < _INTERIOR_ZERO or np.min(P) <= 0:
        raise SingularProfileError("phi must stay positive on the rectangle")
    lap = phi.dss(s, t) + phi.dtt(s, t)
    grad2 = phi.ds(s, t) ** 2 + phi.dt(s, t) ** 2
    return -2.0 * qt * lap / P + qt * (qt - 1) * (1.0 - grad2) / P ** 2


def canonical_variation_scalar(base_R, fiber_R_at_unit, delta):
    """Total scalar curvature after scaling the fiber metric by delta^2.

    For a flat-distribution submersion this is fiber_R_at_unit/delta^2 +
    base_R (the |A|^2 correction vanishes).
    """
    if delta <= 0:
        raise InvalidSpecError("delta must be positive")
    return fiber_R_at_unit / delta ** 2 + base_R


# ---------------------------------------------------------------------------
# slowdown concordance
# ---------------------------------------------------------------------------

def make_smoothstep(L, k1=None, k2=None):
    """Quintic smoothstep on (0, L): 0 up to k1, 1 from k2 on, C^2 between."""
    L = float(L)
    if k1 is None:
        k1 = 0.25 * L
    if k2 is None:
        k2 = 0.75 * L
    if not 0.0 < k1 < k2 < L:
        raise InvalidSpecError("need 0 < k1 < k2 < L")
    coeffs = _quintic_match(k1, (0.0, 0.0, 0.0), k2, (1.0, 0.0, 0.0))
    pieces = [ConstPiece((0.0, k1), 0.0),
              PolyPiece((k1, k2), coeffs, origin=k1),
              ConstPiece((k2, L), 1.0)]
    return SmoothFn1D(L, pieces)


def slowdown_concordance(path, n, grid_shape=(200, 200), budget=20,
                         tolerance=0.0):
    """Find a slowdown factor making a psc path run as a psc cylinder metric.

    ``path`` maps sigma in [0, 1] to a WarpedSphereMetric of dimension ``n``
    on a fixed (0, b).  The path is reparameterized by a quintic smoothstep
    eta over an interval of length L (constant near both ends, so the
    cylinder metric is a product there), and L is doubled (Lambda = 1/L
    halved from 1) until the full (s, t) grid certifies min scalar > 0.

    Returns (Lambda, eta profile on (0, L), certificate).
    """
    g0, g1 = path(0.0), path(1.0)
    b = g0.f.b
    ns, nt = grid_shape
    tgrid = np.linspace(0.0, b, nt + 2)[1:-1]
    for g, tag in ((g0, "start"), (g1, "end")):
        mn = float(np.min(scalar_warped(g, tgrid)))
        if mn <= tolerance:
            raise CertificationFailedError(
                f"path {tag} metric is not psc (min R = {mn:.6g})",
                best_margin=mn)

    best = -np.inf
    L = 1.0
    for _ in range(budget):
        eta = make_smoothstep(L)
        h = L * 1e-4

        def profile_at(s):
            return path(float(np.clip(eta(np.clip(s, 0.0, L)), 0.0, 1.0))).f

        phi = Phi2D.from_path(profile_at, h)
        cyl = CylFamilyMetric(n - 1, phi)
        sgrid = np.linspace(0.0, L, ns + 2)[1:-1]
        S, T = np.meshgrid(sgrid, tgrid, indexing="ij")
        R = np.empty_like(S)
        for i, sv in enumerate(sgrid):
            R[i] = scalar_cyl_family(cyl, sv, tgrid)
        mn = float(R.min())
        if mn > tolerance:
            cert = IsotopyCertificate(
                grid=f"{ns}x{nt} interior grid, L={L:.6g}",
                min_scalar=mn, tolerance=tolerance, label="slowdown")
            return 1.0 / L, eta, cert
        best = max(best, mn)
        L *= 2.0
    raise CertificationFailedError(
        f"no slowdown factor certified within budget {budget}",
        best_margin=best)


# ---------------------------------------------------------------------------
# export
# ---------------------------------------------------------------------------

def write_curvature_csv(m, path_or_buf, density=256):
    """CSV curvature profile with columns t, R, Ric_t, Ric_sphere."""
    t = sample_grid(m.f.b, density)
    R = scalar_warped(m, t)
    rt, rs = ricci_warped(m, t)
    data = np.column_stack([t, R, rt, rs])
    header = "t,R,Ric_t,Ric_sphere"
    if hasattr(path_or_buf, "write"):
        np.savetxt(path_or_buf, data, fmt="%.17g", delimiter=",",
                   header=header, comments="")
    else:
        with open(path_or_buf, "w") as fh:
            np.savetxt(fh, data, fmt="%.17g", delimiter=",",
                       header=header, comments="")
