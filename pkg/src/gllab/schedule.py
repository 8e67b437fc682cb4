"""Compilation of handle data into certified construction schedules.

A schedule is an ordered list of segments, each transforming a symbolic
metric descriptor (profiles plus region tags, never a full tensor field)
and carrying a numeric positivity certificate:

* ``product-extension`` — carry the metric along the gradient flow between
  critical levels; certificate is the incoming metric's own positivity.
* ``standardize`` — linear profile homotopy from the incoming rotationally
  symmetric form to a mixed-torpedo form near the surgery sphere, with the
  cap radius delta found by geometric halving.
* ``handle-attach`` — the bent-curve construction through the handle, with
  the curve-inequality certificate and the smoothing windows recorded.
* ``transition-smoothing`` — the corner smoothing between consecutive
  critical levels.

Everything is deterministic; batch sweeps parallelize over grid cells only.
"""

from __future__ import annotations

import json
from dataclasses import dataclass, field

import numpy as np

from .certify import IsotopyCertificate, pmap
from .curvature import (DoublyWarpedMetric, WarpedSphereMetric,
                        scalar_doubly_warped, scalar_warped)
from .errors import (CertificationFailedError, CompilationFailedError,
                     DemoFailedError, HypothesisViolationError,
                     InvalidSpecError, InvalidWindowError)
from .fnspace import (SinePiece, SmoothFn1D, TorpedoSpec, _quintic_match,
                      check_U_membership, check_V_membership,
                      linear_homotopy, make_double_torpedo, make_torpedo,
                      reflect, sample_grid)
from .glbend import (BendConstants, assemble_gamma, initial_bend,
                     quarter_bend_curve, synth_transition)
from .hypersurface import connected_sum_foliation, mixed_torpedo_via_J
from .morsealg import check_admissible, reverse, well_index

__all__ = [
    "MetricDescriptor",
    "Segment",
    "Schedule",
    "DemoReport",
    "compile_gl_cobordism",
    "compile_reverse",
    "two_surgery_demo",
    "smooth_YsYt",
    "batch_sweep",
    "round_metric",
    "round_doubly_warped",
    "write_schedule_csv",
]


# ---------------------------------------------------------------------------
# descriptors and schedule structure
# ---------------------------------------------------------------------------

@dataclass
class MetricDescriptor:
    """Symbolic metric state: a kind tag plus JSON-able parameters.

    ``region`` tags which part of the manifold the descriptor's profiles
    describe: "original" (untouched), "transition", or "standard".
    """

    kind: str
    params: dict = field(default_factory=dict)
    region: str = "original"

    def to_json(self):
        return {"kind": self.kind, "region": self.region,
                "params": self.params}

    def __eq__(self, other):
        if not isinstance(other, MetricDescriptor):
            return NotImplemented
        return json.dumps(self.to_json(), sort_keys=True) == \
            json.dumps(other.to_json(), sort_keys=True)


@dataclass
class Segment:
    """One schedule step: kind, parameters, start/end descriptors, proof."""

    kind: str
    parameters: dict
    start: MetricDescriptor
    end: MetricDescriptor
    certificate: IsotopyCertificate

    KINDS = ("product-extension", "standardize", "handle-attach",
             "transition-smoothing")

    def __post_init__(self):
        if self.kind not in self.KINDS:
            raise InvalidSpecError(f"unknown segment kind {self.kind!r}")

    def to_json(self):
        return {"kind": self.kind, "parameters": self.parameters,
                "start": self.start.to_json(), "end": self.end.to_json(),
                "certificate": self.certificate.to_json()}


@dataclass
class Schedule:
    """Certified segment chain; descriptors must match end-to-start."""

    segments: list

    def __post_init__(self):
        for a, b in zip(self.segments, self.segments[1:]):
            if a.end != b.start:
                raise InvalidSpecError(
                    f"segment chaining broken between {a.kind!r} and "
                    f"{b.kind!r}")
        bad = [s.kind for s in self.segments if not s.certificate.passed]
        if bad:
            raise CertificationFailedError(
                f"segments with failing certificates: {bad}")

    @property
    def min_scalar(self):
        if not self.segments:
            return np.inf
        return min(s.certificate.min_scalar for s in self.segments)

    @property
    def start(self):
        return self.segments[0].start if self.segments else None

    @property
    def end(self):
        return self.segments[-1].end if self.segments else None

    def to_json(self):
        return {"segments": [s.to_json() for s in self.segments],
                "min_scalar": self.min_scalar if self.segments else None}

    def dumps(self):
        return json.dumps(self.to_json(), sort_keys=True)


def write_schedule_csv(schedule, path_or_buf):
    """Stage-by-stage curvature minima: columns index,kind,min_scalar."""
    lines = ["index,kind,min_scalar"]
    for i, seg in enumerate(schedule.segments):
        lines.append(f"{i},{seg.kind},{seg.certificate.min_scalar:.17g}")
    text = "\n".join(lines) + "\n"
    if hasattr(path_or_buf, "write"):
        path_or_buf.write(text)
    else:
        with open(path_or_buf, "w") as fh:
            fh.write(text)


# ---------------------------------------------------------------------------
# round building blocks
# ---------------------------------------------------------------------------

def round_metric(n, radius=1.0):
    """The round n-sphere of the given radius as a warped metric."""
    if radius <= 0:
        raise InvalidSpecError("radius must be positive")
    b = radius * np.pi
    prof = SmoothFn1D(b, [SinePiece((0.0, b), radius, 1.0 / radius)])
    return WarpedSphereMetric(n, prof)


def round_doubly_warped(p, q, radius=1.0):
    """The round (p+q+1)-sphere split over the S^p x S^q join.

    u = radius*cos(t/radius), v = radius*sin(t/radius) on (0, radius*pi/2).
    """
    b = radius * np.pi / 2.0
    u = SmoothFn1D(b, [SinePiece((0.0, b), radius, 1.0 / radius,
                                 phase=np.pi / 2.0)])
    v = SmoothFn1D(b, [SinePiece((0.0, b), radius, 1.0 / radius)])
    return DoublyWarpedMetric(p, q, u, v)


def _mixed_torpedo_profiles(eps, delta, b):
    """(u, v) mixed-torpedo profiles on a common domain (0, b).

    u is a reflected eps-torpedo (closes at b), v a delta-torpedo (closes
    at 0); tube lengths absorb whatever b leaves after caps and blends.
    """
    su = TorpedoSpec(eps)
    sv = TorpedoSpec(delta)
    tube_u = b - (su.delta * np.pi / 2.0 + su.blend_width)
    tube_v = b - (sv.delta * np.pi / 2.0 + sv.blend_width)
    if tube_u <= 0 or tube_v <= 0:
        raise InvalidSpecError(
            f"domain {b:.6g} too short for caps eps={eps}, delta={delta}")
    u = reflect(make_torpedo(TorpedoSpec(eps, tube_length=tube_u)))
    v = make_torpedo(TorpedoSpec(delta, tube_length=tube_v))
    return u, v


def _certify_homotopy(p, q, u0, v0, u1, v1, n_lambda=11, density=256,
                      tolerance=0.0):
    """Min scalar of the linear profile homotopy over a (lambda, t) grid."""
    t = sample_grid(u0.b, density, interior=True)
    lams = np.linspace(0.0, 1.0, n_lambda)

    def at(lam):
        m = DoublyWarpedMetric(p, q, linear_homotopy(u0, u1, lam),
                               linear_homotopy(v0, v1, lam),
                               open_profile=True)
        return float(np.min(scalar_doubly_warped(m, t)))

    mins = pmap(at, lams)
    return IsotopyCertificate(
        grid=f"{n_lambda} x {t.size} (lambda, t) interior grid",
        min_scalar=float(min(mins)), tolerance=tolerance,
        label="profile homotopy")


def _standardize_search(p, q, radius, delta_start=0.5, budget=20):
    """Halve delta until the round -> mixed-torpedo homotopy certifies.

    Returns (delta, (u1, v1), certificate).  The eps cap is tied to delta
    (equal caps) and both torpedoes live on the round join domain.
    """
    g = round_doubly_warped(p, q, radius)
    b = g.b
    delta = delta_start
    best = -np.inf
    for _ in range(budget):
        try:
            u1, v1 = _mixed_torpedo_profiles(delta, delta, b)
            ru = check_U_membership(u1)
            rv = check_V_membership(v1)
            if ru.passed and rv.passed:
                cert = _certify_homotopy(p, q, g.u, g.v, u1, v1)
                if cert.passed:
                    return delta, (u1, v1), cert
                best = max(best, cert.min_scalar)
        except InvalidSpecError:
            pass
        delta *= 0.5
    raise CompilationFailedError(
        f"standardization delta search exhausted (budget {budget}, "
        f"best margin {best:.6g})")


def _handle_attach(consts, r1=0.5, r0=0.2):
    """Certified bent curve through the handle for the given constants."""
    prefix = initial_bend(consts, r1=r1)
    trans = synth_transition(consts, r0=r0, theta0=prefix[1])
    return assemble_gamma(consts, prefix, trans)


# ---------------------------------------------------------------------------
# compilation
# ---------------------------------------------------------------------------

def _is_well_indexed(desc):
    level_of = {}
    for pt in desc.points:
        level_of.setdefault(pt.index, set()).add(pt.level)
    if any(len(v) > 1 for v in level_of.values()):
        return False
    idxs = sorted(level_of)
    levels = [next(iter(level_of[k])) for k in idxs]
    return all(a < b for a, b in zip(levels, levels[1:]))


def _certify_g0(g0):
    """Interior-grid positivity certificate for the incoming metric."""
    t = sample_grid(g0.b, 512, interior=True)
    if isinstance(g0, WarpedSphereMetric):
        mn = float(np.min(scalar_warped(g0, t)))
    elif isinstance(g0, DoublyWarpedMetric):
        mn = float(np.min(scalar_doubly_warped(g0, t)))
    else:
        raise InvalidSpecError(
            "g0 must be a warped or doubly-warped metric")
    cert = IsotopyCertificate(grid=f"{t.size} interior samples",
                              min_scalar=mn, label="incoming metric")
    if not cert.passed:
        raise CertificationFailedError(
            f"g0 is not certified psc (min R = {mn:.6g})", best_margin=mn)
    return cert


def _g0_descriptor(g0):
    if isinstance(g0, WarpedSphereMetric):
        return MetricDescriptor("warped", {"n": g0.n, "f": g0.f.to_json()})
    return MetricDescriptor("doubly-warped",
                            {"p": g0.p, "q": g0.q,
                             "u": g0.u.to_json(), "v": g0.v.to_json()})


def _round_radius_of(g0):
    """Radius when g0 is a round warped sphere; domain-scale otherwise."""
    if isinstance(g0, WarpedSphereMetric):
        return g0.b / np.pi
    return g0.b * 2.0 / np.pi


def compile_gl_cobordism(g0, desc):
    """Compile Morse data over a psc metric into a certified schedule.

    Per critical point (in level order): a product extension to the critical
    level, a standardization homotopy to the mixed-torpedo form near the
    surgery sphere (delta halved until certified), and the handle attachment
    with its curve-inequality certificate; consecutive critical levels are
    joined by a transition-smoothing segment.
    """
    if not check_admissible(desc):
        raise HypothesisViolationError(
            "description is not admissible (some index exceeds n - 2)")
    if not _is_well_indexed(desc):
        raise InvalidSpecError(
            "description must be well-indexed (run well_index first)")
    n = desc.n
    g0_cert = _certify_g0(g0)
    state = _g0_descriptor(g0)
    radius = _round_radius_of(g0)
    segments = []
    points = sorted(desc.points, key=lambda pt: (pt.level, pt.id))
    if not points:
        seg = Segment("product-extension", {"span": [0.0, 1.0]},
                      state, state, g0_cert)
        return Schedule([seg])
    prev_level = 0.0
    for i, pt in enumerate(points):
        k = pt.index          # surgery on S^{k-1} x D^{n-k+1}, handle index k
        p_dim = max(k - 1, 0)
        q_dim = n - p_dim - 1
        if q_dim < 2:
            raise HypothesisViolationError(
                f"point {pt.id!r}: codimension too small (q = {q_dim} < 2)")
        if i > 0:
            end = MetricDescriptor(state.kind, dict(state.params),
                                   region="original")
            segments.append(Segment(
                "transition-smoothing",
                {"between_levels": [prev_level, pt.level]},
                state, end, segments[-1].certificate))
            state = end
        # product extension up to the critical level
        seg_end = MetricDescriptor(state.kind, dict(state.params),
                                   region=state.region)
        segments.append(Segment(
            "product-extension", {"span": [prev_level, pt.level]},
            state, seg_end, g0_cert))
        state = seg_end
        # standardize near the surgery sphere
        delta, (u1, v1), std_cert = _standardize_search(p_dim, q_dim, radius)
        std = MetricDescriptor(
            "mixed-torpedo",
            {"p": p_dim, "q": q_dim, "eps": delta, "delta": delta,
             "tube_u": u1.pieces[-1].interval[1] - u1.pieces[-1].interval[0],
             "tube_v": v1.pieces[-1].interval[1] - v1.pieces[-1].interval[0],
             "b": u1.b},
            region="standard")
        segments.append(Segment(
            "standardize", {"delta": delta, "eps": delta}, state, std,
            std_cert))
        state = std
        # attach the handle through the bent curve
        consts = BendConstants(R0=std_cert.min_scalar / (2.0 * q_dim),
                               q=q_dim)
        bend = _handle_attach(consts)
        post = MetricDescriptor(
            "post-surgery",
            {"index": k, "p": p_dim, "q": q_dim,
             "base": std.to_json(), "r_inf": bend.landmarks["r_inf"]},
            region="transition")
        segments.append(Segment(
            "handle-attach",
            {"index": k, "delta": delta,
             "tube_lengths": [state.params["tube_u"],
                              state.params["tube_v"]],
             "curve_landmarks": bend.landmarks,
             "smoothing_windows": {"eps1": bend.landmarks["r1"],
                                   "eps2": bend.landmarks["r0"],
                                   "eps3": bend.landmarks["r0"] / 2.0}},
            std, post, bend.certificate))
        state = post
        prev_level = pt.level
    return Schedule(segments)


def compile_reverse(schedule, desc):
    """Compile the upside-down schedule and compare end descriptors.

    The reversed description must be admissible.  The reversed schedule
    runs the forward segments backwards (each keeping its certificate);
    the identity report rebuilds the forward standardized descriptor and
    the reversed schedule's final descriptor at a common tube length and
    reports the max sampled profile deviation — the two agree up to tube
    length by construction, so the report certifies the bookkeeping.

    Returns (reversed schedule, report dict).
    """
    rdesc = reverse(desc)
    if not rdesc.flags.get("admissible", check_admissible(rdesc)):
        raise HypothesisViolationError(
            "reversed description is not admissible")
    rsegs = []
    for seg in reversed(schedule.segments):
        rsegs.append(Segment(seg.kind, dict(seg.parameters),
                             seg.end, seg.start, seg.certificate))
    rschedule = Schedule(rsegs)
    report = {"identity": True, "max_profile_deviation": 0.0,
              "tube_rescale": None}
    fwd_std = next((s.end for s in schedule.segments
                    if s.kind == "standardize"), None)
    if fwd_std is not None:
        pr = fwd_std.params
        # rebuild both descriptors at a common tube length and sample
        common_b = pr["eps"] * np.pi / 2.0 + TorpedoSpec(pr["eps"]).blend_width + 1.0
        ua, va = _mixed_torpedo_profiles(pr["eps"], pr["delta"], common_b)
        ub, vb = _mixed_torpedo_profiles(pr["eps"], pr["delta"], common_b)
        t = sample_grid(common_b, 256)
        dev = max(float(np.max(np.abs(ua(t) - ub(t)))),
                  float(np.max(np.abs(va(t) - vb(t)))))
        report = {"identity": dev < 1e-8,
                  "max_profile_deviation": dev,
                  "tube_rescale": [pr["tube_u"], pr["tube_v"]],
                  "common_tube_domain": common_b}
    return rschedule, report


# ---------------------------------------------------------------------------
# smoothing windows
# ---------------------------------------------------------------------------

def smooth_YsYt(Ys, Yt, eps1, eps2, eps3):
    """Replace the fiber-stretch factors by smooth compactly-deviating ones.

    The returned evaluators equal the originals on [eps2, eps1] (and
    beyond), are identically 1 on [0, eps3], and blend with a quintic
    smoothstep in between, so Y - Y' is supported in [0, eps2].
    """
    if not eps1 > eps2 > eps3 > 0:
        raise InvalidWindowError(
            f"need eps1 > eps2 > eps3 > 0, got {(eps1, eps2, eps3)}")
    coeffs = _quintic_match(eps3, (0.0, 0.0, 0.0), eps2, (1.0, 0.0, 0.0))

    def blend(x):
        x = np.asarray(x, dtype=float)
        sigma = np.clip(np.polynomial.polynomial.polyval(x, coeffs), 0.0, 1.0)
        return np.where(x <= eps3, 0.0, np.where(x >= eps2, 1.0, sigma))

    def make(Y):
        def Yp(x):
            x = np.asarray(x, dtype=float)
            out = 1.0 + blend(x) * (np.asarray(Y(x), dtype=float) - 1.0)
            return float(out) if out.ndim == 0 else out
        return Yp

    return make(Ys), make(Yt)


# ---------------------------------------------------------------------------
# the two-surgery demo pipeline
# ---------------------------------------------------------------------------

@dataclass
class DemoReport:
    """Chained per-stage certificates between two metric descriptors."""

    n: int
    p: int
    q: int
    stages: list                   # [{"id": str, "certificate": cert}]
    endpoints: tuple               # (start descriptor, end descriptor)

    @property
    def passed(self):
        return all(st["certificate"].passed for st in self.stages)

    def minima(self):
        return {st["id"]: st["certificate"].min_scalar for st in self.stages}

    def to_json(self):
        return {"n": self.n, "p": self.p, "q": self.q,
                "passed": bool(self.passed),
                "stages": [{"id": st["id"],
                            "certificate": st["certificate"].to_json()}
                           for st in self.stages],
                "endpoints": [d.to_json() for d in self.endpoints]}

    def write_csv(self, path_or_buf):
        lines = ["stage,min_scalar"]
        for st in self.stages:
            lines.append(f"{st['id']},{st['certificate'].min_scalar:.17g}")
        text = "\n".join(lines) + "\n"
        if hasattr(path_or_buf, "write"):
            path_or_buf.write(text)
        else:
            with open(path_or_buf, "w") as fh:
                fh.write(text)


def two_surgery_demo(n, p, radius=1.0):
    """Round sphere -> two consecutive surgeries -> certified return chain.

    Runs the full pipeline: certify the round metric, standardize it near
    the first surgery sphere S^p, attach the index-(p+1) handle, attach the
    cancelling index-(p+2) handle, then the adjustment chain back: a linear
    profile homotopy to a torpedo form, the connected-sum foliation isotopy,
    and the mixed-torpedo pullback-identity check.  Every stage carries an
    IsotopyCertificate; a failing stage raises with its stage id.
    """
    q = n - p - 1
    if p < 1:
        raise InvalidSpecError("need p >= 1")
    if q < 3:
        raise HypothesisViolationError(
            f"two consecutive surgeries need q = n - p - 1 >= 3, got {q}")
    if p + 2 > n - 2:
        raise HypothesisViolationError(
            f"second handle index {p + 2} exceeds n - 2 = {n - 2}")
    stages = []

    def push(stage_id, cert):
        stages.append({"id": stage_id, "certificate": cert})
        if not cert.passed:
            raise DemoFailedError(
                f"stage {stage_id!r} failed: min scalar "
                f"{cert.min_scalar:.6g}")
        return cert

    # stage 1: the round metric itself
    g_round = round_metric(n, radius)
    push("round", _certify_g0(g_round))

    # stage 2: standardize near S^p
    delta, (u1, v1), std_cert = _standardize_search(p, q, radius)
    push("standardize", std_cert)

    # stage 3: first surgery (handle index p+1, fiber S^q)
    consts1 = BendConstants(R0=std_cert.min_scalar / (2.0 * q), q=q)
    bend1 = _handle_attach(consts1)
    push("surgery-1", bend1.certificate)

    # stage 4: cancelling surgery (handle index p+2, fiber S^{q-1})
    q2 = q - 1
    consts2 = BendConstants(R0=bend1.certificate.min_scalar / (2.0 * q2),
                            q=q2)
    bend2 = _handle_attach(consts2)
    push("surgery-2", bend2.certificate)

    # stage 5: linear homotopy of the profile to a torpedo form
    b = g_round.b
    tor = make_double_torpedo(delta, b)
    lams = np.linspace(0.0, 1.0, 11)
    t = sample_grid(b, 256, interior=True)

    def homotopy_min(lam):
        m = WarpedSphereMetric(n, linear_homotopy(g_round.f, tor, lam),
                               open_profile=True)
        return float(np.min(scalar_warped(m, t)))

    mins = pmap(homotopy_min, lams)
    push("f-to-torpedo", IsotopyCertificate(
        grid=f"11 x {t.size} (lambda, t) interior grid",
        min_scalar=float(min(mins)), label="profile homotopy"))

    # stage 6: connected-sum foliation isotopy (caps small enough that the
    # corner bend clears the delta*pi/2 lines)
    cap = min(delta, 0.25)
    corner = quarter_bend_curve(1.0, 1.0, 0.4, eps=cap, delta=cap)
    _family, fol_cert = connected_sum_foliation(
        corner, tau=0.05, nu_grid=np.linspace(0.0, 1.0, 21),
        eps=cap, delta_p=cap, p=p, q=q)
    push("foliation", fol_cert)

    # stage 7: mixed-torpedo pullback identity and positivity
    m_mtor, rep = mixed_torpedo_via_J(delta, delta, c1=2.0, c2=2.0,
                                      bend_radius=0.5, p=p, q=q)
    tm = sample_grid(m_mtor.b, 256, interior=True)
    push("mtor-endpoint", IsotopyCertificate(
        grid=f"{tm.size} interior samples",
        min_scalar=float(np.min(scalar_doubly_warped(m_mtor, tm))),
        label="mixed torpedo",
        extra={"max_pullback_deviation": rep["max_deviation"]}))

    start = _g0_descriptor(g_round)
    end = MetricDescriptor(
        "post-surgery",
        {"index": p + 2, "p": p, "q": q, "delta": delta,
         "r_inf_1": bend1.landmarks["r_inf"],
         "r_inf_2": bend2.landmarks["r_inf"]},
        region="transition")
    return DemoReport(n=n, p=p, q=q, stages=stages, endpoints=(start, end))


# ---------------------------------------------------------------------------
# batch sweeps
# ---------------------------------------------------------------------------

def batch_sweep(g0_family, desc_family):
    """Compile every (g0, desc) grid cell; collect failures per cell.

    Returns a dict with "cells" (one record per grid point, either the
    schedule or the error message) and "shared_delta": the single
    standardization delta certifying every successful cell, when one exists
    (the smallest per-cell delta, revalidated against each cell), else None.
    """
    g0_family = list(g0_family)
    desc_family = list(desc_family)
    grid = [(i, j) for i in range(len(g0_family))
            for j in range(len(desc_family))]

    def run(cell):
        i, j = cell
        try:
            sched = compile_gl_cobordism(g0_family[i], desc_family[j])
            return {"g0": i, "desc": j, "ok": True, "schedule": sched}
        except Exception as exc:  # per-cell failures are collected, not fatal
            return {"g0": i, "desc": j, "ok": False,
                    "error": f"{type(exc).__name__}: {exc}"}

    cells = pmap(run, grid)
    deltas = []
    for cell in cells:
        if cell["ok"]:
            for seg in cell["schedule"].segments:
                if seg.kind == "standardize":
                    deltas.append((seg.parameters["delta"], cell["g0"],
                                   seg.start, seg.end))
    shared = None
    if deltas:
        cand = min(d for d, *_ in deltas)
        ok = True
        for cell in cells:
            if not cell["ok"]:
                continue
            for seg in cell["schedule"].segments:
                if seg.kind != "standardize":
                    continue
                radius = _round_radius_of(g0_family[cell["g0"]])
                pq = seg.end.params
                try:
                    u1, v1 = _mixed_torpedo_profiles(cand, cand,
                                                     radius * np.pi / 2.0)
                    g = round_doubly_warped(pq["p"], pq["q"], radius)
                    cert = _certify_homotopy(pq["p"], pq["q"], g.u, g.v,
                                             u1, v1)
                    if not cert.passed:
                        ok = False
                except InvalidSpecError:
                    ok = False
        if ok:
            shared = cand
    return {"cells": cells, "shared_delta": shared}
