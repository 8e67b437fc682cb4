"""Finite-difference coordinate tensor engine.

This module is the independent brute-force verifier for every closed-form
curvature formula in the toolkit.  A :class:`MetricChart` is nothing but a
callable returning the metric components g_ij at a point on a coordinate
rectangle; Christoffel symbols, the Riemann tensor, and scalar curvature are
then assembled from central differences, and extrinsic data (second
fundamental form, principal curvatures) from finite differences of an
embedding map.

Everything here is second-order accurate in the step and deliberately free of
any symmetry assumptions, so agreement with the closed-form evaluators is a
genuine cross-check rather than a tautology.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .errors import DegenerateEmbeddingError, InvalidSpecError

__all__ = [
    "MetricChart",
    "HypersurfaceParam",
    "christoffel",
    "riemann",
    "ricci_from_chart",
    "scalar_from_chart",
    "principal_curvatures",
    "geodesic_sphere_fit",
    "sphere_patch",
    "cap_rescaling_deviation",
    "euclidean_chart",
    "polar_chart",
    "perturbed_quadratic_chart",
    "round_sphere_normal_chart",
    "warped_chart",
    "doubly_warped_chart",
    "cyl_family_chart",
]


@dataclass
class MetricChart:
    """Coordinate metric evaluator on a rectangle.

    ``g`` maps a point (length-``dim`` array) to a symmetric positive-definite
    ``dim x dim`` matrix.  ``step`` is the finite-difference spacing used by
    every derived quantity.
    """

    dim: int
    rectangle: list
    g: object
    step: float = 1e-4

    def __post_init__(self):
        if self.dim < 2:
            raise InvalidSpecError("chart dimension must be >= 2")
        if len(self.rectangle) != self.dim:
            raise InvalidSpecError("rectangle must give bounds per axis")
        ext = min(hi - lo for lo, hi in self.rectangle)
        if ext <= 0:
            raise InvalidSpecError("rectangle extents must be positive")
        if not 0 < self.step <= 1e-2 * ext:
            raise InvalidSpecError(
                f"step must lie in (0, {1e-2 * ext:.3g}] for this rectangle")

    def with_step(self, step):
        return MetricChart(self.dim, self.rectangle, self.g, step)

    def metric(self, x):
        return np.asarray(self.g(np.asarray(x, dtype=float)), dtype=float)


@dataclass
class HypersurfaceParam:
    """Embedded hypersurface: (dim-1) parameters -> chart point."""

    chart: MetricChart
    embedding: object
    outward_from: np.ndarray = None
    flip_normal: bool = False

    def point(self, u):
        return np.asarray(self.embedding(np.asarray(u, dtype=float)),
                          dtype=float)


# ---------------------------------------------------------------------------
# intrinsic curvature
# ---------------------------------------------------------------------------

def _dg(chart, x, i):
    """Central difference of the metric matrix along coordinate i."""
    h = chart.step
    e = np.zeros(chart.dim)
    e[i] = h
    return (chart.metric(x + e) - chart.metric(x - e)) / (2.0 * h)


def christoffel(chart, x):
    """Gamma^k_ij = 1/2 g^{kl} (g_{il,j} + g_{jl,i} - g_{ij,l})."""
    x = np.asarray(x, dtype=float)
    d = chart.dim
    dg = np.stack([_dg(chart, x, i) for i in range(d)])  # dg[l, i, j] = g_ij,l
    ginv = np.linalg.inv(chart.metric(x))
    # lowered symbol: Gamma_{l,ij} = 1/2 (g_{il,j} + g_{jl,i} - g_{ij,l})
    low = 0.5 * (np.einsum("jil->lij", dg) + np.einsum("ijl->lij", dg)
                 - dg)
    return np.einsum("kl,lij->kij", ginv, low)


def riemann(chart, x):
    """R^l_{ijk} = d_i Gamma^l_jk - d_j Gamma^l_ik + Gamma*Gamma terms."""
    x = np.asarray(x, dtype=float)
    d = chart.dim
    h = chart.step
    gamma = christoffel(chart, x)
    dgamma = np.empty((d, d, d, d))  # dgamma[i, l, j, k] = d_i Gamma^l_jk
    for i in range(d):
        e = np.zeros(d)
        e[i] = h
        dgamma[i] = (christoffel(chart, x + e) - christoffel(chart, x - e)) \
            / (2.0 * h)
    quad = np.einsum("lim,mjk->lijk", gamma, gamma)
    R = (np.einsum("iljk->lijk", dgamma) - np.einsum("jlik->lijk", dgamma)
         + quad - np.einsum("ljik->lijk", quad))
    return R


def ricci_from_chart(chart, x):
    """Ric_jk = R^i_{ijk}."""
    return np.einsum("iijk->jk", riemann(chart, x))


def scalar_from_chart(chart, x):
    """Scalar curvature g^{jk} Ric_jk, second-order accurate in the step."""
    x = np.asarray(x, dtype=float)
    ginv = np.linalg.inv(chart.metric(x))
    return float(np.einsum("jk,jk->", ginv, ricci_from_chart(chart, x)))


# ---------------------------------------------------------------------------
# extrinsic curvature
# ---------------------------------------------------------------------------

def _embedding_jet(hs, u):
    """Embedding value, Jacobian, and Hessian by central differences."""
    h = hs.chart.step
    u = np.asarray(u, dtype=float)
    m = u.size
    x0 = hs.point(u)
    d = x0.size
    J = np.empty((d, m))
    H = np.empty((d, m, m))
    for a in range(m):
        ea = np.zeros(m)
        ea[a] = h
        xp, xm = hs.point(u + ea), hs.point(u - ea)
        J[:, a] = (xp - xm) / (2.0 * h)
        H[:, a, a] = (xp - 2.0 * x0 + xm) / h ** 2
    for a in range(m):
        for bb in range(a + 1, m):
            ea = np.zeros(m)
            eb = np.zeros(m)
            ea[a] = h
            eb[bb] = h
            mixed = (hs.point(u + ea + eb) - hs.point(u + ea - eb)
                     - hs.point(u - ea + eb) + hs.point(u - ea - eb)) \
                / (4.0 * h ** 2)
            H[:, a, bb] = mixed
            H[:, bb, a] = mixed
    return x0, J, H


def principal_curvatures(hs, u):
    """Eigenvalues (ascending) of the shape operator at parameter value u.

    The second fundamental form is taken with respect to the outward unit
    normal, so a round sphere of radius eps in a Euclidean chart yields
    -1/eps in every direction.
    """
    chart = hs.chart
    x0, J, H = _embedding_jet(hs, u)
    G = chart.metric(x0)
    induced = J.T @ G @ J
    if np.linalg.matrix_rank(J, tol=1e-8) < J.shape[1]:
        raise DegenerateEmbeddingError(
            "embedding Jacobian is rank-deficient at the sample point")
    # unit normal: g-orthogonal complement of the tangent columns
    _, _, vt = np.linalg.svd((G @ J).T)
    eta = vt[-1]
    eta = eta / np.sqrt(eta @ G @ eta)
    ref = hs.outward_from
    if ref is None:
        ref = np.zeros(chart.dim)
    if eta @ (x0 - ref) < 0:
        eta = -eta
    if hs.flip_normal:
        eta = -eta
    gamma = christoffel(chart, x0)
    # second fundamental form in the parameter basis, w.r.t. outward eta:
    # A_ab = g(-grad_a eta, t_b) = +g(eta, D_a t_b),
    # with D_a t_b = H_ab + Gamma(J_a, J_b)
    cov = H + np.einsum("lij,ia,jb->lab", gamma, J, J)
    A = np.einsum("l,lk,kab->ab", eta, G, cov)
    # orthonormalize the tangent frame w.r.t. the induced metric and read the
    # shape operator off as a symmetric eigenproblem
    L = np.linalg.cholesky(induced)
    Linv = np.linalg.inv(L)
    Asym = Linv @ A @ Linv.T
    return np.sort(np.linalg.eigvalsh(Asym))


def sphere_patch(chart, center, eps, direction):
    """Local parameterization of the coordinate eps-sphere near a direction.

    phi(u) = center + eps * unit(w + sum_a u_a E_a), with (E_a) a Euclidean
    orthonormal complement of the unit vector w.  Immersive near u = 0.
    """
    d = chart.dim
    w = np.asarray(direction, dtype=float)
    w = w / np.linalg.norm(w)
    # complete w to an orthonormal basis
    basis = np.linalg.qr(np.column_stack(
        [w] + [np.eye(d)[:, i] for i in range(d)]))[0]
    E = basis[:, 1:d]
    center = np.asarray(center, dtype=float)

    def embed(u):
        vec = w + E @ np.asarray(u, dtype=float)
        return center + eps * vec / np.linalg.norm(vec)

    return HypersurfaceParam(chart, embed, outward_from=center)


_FIT_DIRECTIONS = [(1.0, 0.3, -0.2), (-0.4, 1.0, 0.5), (0.2, -0.6, 1.0)]


def _fit_directions(dim):
    out = []
    for seed in _FIT_DIRECTIONS:
        v = np.zeros(dim)
        k = min(dim, len(seed))
        v[:k] = seed[:k]
        out.append(v)
    return out


def geodesic_sphere_fit(chart, center, radii, directions=None):
    """Least-squares fit lambda(eps) ~ c_{-1}/eps + c_1 * eps.

    Principal curvatures of the coordinate eps-spheres about ``center`` are
    sampled over a few fixed directions; in a normal-coordinate chart the
    model predicts c_{-1} = -1 with vanishing residual as the radii shrink.
    """
    center = np.asarray(center, dtype=float)
    if directions is None:
        directions = _fit_directions(chart.dim)
    rows = []
    rhs = []
    for eps in radii:
        for w in directions:
            hs = sphere_patch(chart, center, eps, w)
            lams = principal_curvatures(hs, np.zeros(chart.dim - 1))
            for lam in lams:
                rows.append([1.0 / eps, eps])
                rhs.append(lam)
    rows = np.asarray(rows)
    rhs = np.asarray(rhs)
    coef, res, _, _ = np.linalg.lstsq(rows, rhs, rcond=None)
    resid = float(np.sqrt(np.mean((rows @ coef - rhs) ** 2)))
    return {"c_m1": float(coef[0]), "c_1": float(coef[1]), "residual": resid}


def cap_rescaling_deviation(chart, center, eps, n_samples=7):
    """Max deviation of the 1/eps^2-rescaled eps-sphere metric from round.

    Pulls the chart metric back along a sphere patch, rescales by 1/eps^2,
    and compares componentwise to the same pullback for the unit round sphere
    sitting in a Euclidean chart (the eps -> 0 limit).
    """
    d = chart.dim
    flat = euclidean_chart(d)
    rng = np.random.default_rng(0)
    dirs = _fit_directions(d) + list(rng.normal(size=(n_samples - 3, d)))
    h = chart.step
    worst = 0.0
    for w in dirs:
        hs = sphere_patch(chart, center, eps, w)
        ref = sphere_patch(flat, np.zeros(d), 1.0, w)
        u0 = np.zeros(d - 1)
        _, J, _ = _embedding_jet(hs, u0)
        G = J.T @ chart.metric(hs.point(u0)) @ J / eps ** 2
        _, Jr, _ = _embedding_jet(ref, u0)
        Gr = Jr.T @ flat.metric(ref.point(u0)) @ Jr
        worst = max(worst, float(np.abs(G - Gr).max()))
    return worst


# ---------------------------------------------------------------------------
# chart constructors
# ---------------------------------------------------------------------------

def euclidean_chart(dim, half_width=2.0, step=1e-4):
    rect = [(-half_width, half_width)] * dim
    return MetricChart(dim, rect, lambda x: np.eye(dim), step)


def polar_chart(step=1e-4):
    """Flat plane in polar coordinates: dr^2 + r^2 dtheta^2."""
    def g(x):
        return np.diag([1.0, x[0] ** 2])
    return MetricChart(2, [(0.1, 3.0), (-np.pi, np.pi)], g, step)


def perturbed_quadratic_chart(dim=3, a=0.1, comp=(1, 1), step=1e-4):
    """delta_ij plus a quadratic perturbation a*x_0^2 on one component."""
    i, j = comp

    def g(x):
        m = np.eye(dim)
        m[i, j] += a * x[0] ** 2
        m[j, i] = m[i, j]
        return m
    return MetricChart(dim, [(-1.0, 1.0)] * dim, g, step)


def round_sphere_normal_chart(dim=3, step=1e-4, half_width=1.2):
    """Unit round sphere in geodesic normal coordinates about a point.

    g_ij(x) = xhat_i xhat_j + (sin^2 r / r^2)(delta_ij - xhat_i xhat_j),
    r = |x|; smooth at 0 with g_ij(0) = delta_ij.
    """
    def g(x):
        r2 = float(x @ x)
        if r2 < 1e-24:
            return np.eye(dim)
        r = np.sqrt(r2)
        xhat = x / r
        proj = np.outer(xhat, xhat)
        s = (np.sin(r) / r) ** 2
        return proj + s * (np.eye(dim) - proj)
    return MetricChart(dim, [(-half_width, half_width)] * dim, g, step)


def _sphere_angle_metric(m, angles):
    """Round S^m metric in nested spherical angles, as a diagonal."""
    diag = np.empty(m)
    acc = 1.0
    for i in range(m):
        diag[i] = acc
        acc *= np.sin(angles[i]) ** 2
    return diag


def warped_chart(f, n, step=1e-4, angle_lo=0.3, angle_hi=np.pi - 0.3):
    """Full coordinate chart for dt^2 + f(t)^2 ds_{n-1}^2.

    Coordinates (t, theta_1 ... theta_{n-1}) with the fiber round metric in
    nested spherical angles.
    """
    def g(x):
        t = x[0]
        fiber = _sphere_angle_metric(n - 1, x[1:])
        return np.diag(np.concatenate([[1.0], float(f(t)) ** 2 * fiber]))
    pad = 0.05 * f.b
    rect = [(pad, f.b - pad)] + [(angle_lo, angle_hi)] * (n - 1)
    return MetricChart(n, rect, g, step)


def doubly_warped_chart(u, v, p, q, step=1e-4, angle_lo=0.3,
                        angle_hi=np.pi - 0.3):
    """Chart for dt^2 + u^2 ds_p^2 + v^2 ds_q^2 in nested angles."""
    n = p + q + 1

    def g(x):
        t = x[0]
        du = float(u(t)) ** 2 * _sphere_angle_metric(p, x[1:1 + p])
        dv = float(v(t)) ** 2 * _sphere_angle_metric(q, x[1 + p:])
        return np.diag(np.concatenate([[1.0], du, dv]))
    pad = 0.05 * u.b
    rect = [(pad, u.b - pad)] + [(angle_lo, angle_hi)] * (n - 1)
    return MetricChart(n, rect, g, step)


def cyl_family_chart(phi, qtilde, s_range, t_range, step=1e-4,
                     angle_lo=0.3, angle_hi=np.pi - 0.3):
    """Chart for ds^2 + dt^2 + phi(s,t)^2 ds_qtilde^2 in nested angles."""
    def g(x):
        val = float(phi.value(x[0], x[1]))
        fiber = val ** 2 * _sphere_angle_metric(qtilde, x[2:])
        return np.diag(np.concatenate([[1.0, 1.0], fiber]))
    rect = [tuple(s_range), tuple(t_range)] + \
        [(angle_lo, angle_hi)] * qtilde
    return MetricChart(2 + qtilde, rect, g, step)
