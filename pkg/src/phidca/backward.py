"""Backward step ``x⁺ ∈ argmin_X g − Φ(·, y)``.

Closed forms cover the proximal catalog; everything else goes through a
cell enumeration over the kinks of the structured ``g`` followed by a smooth
solve in each cell (1-D root find or damped Newton).
"""

from __future__ import annotations

import itertools
from dataclasses import dataclass

import numpy as np
from scipy.optimize import brentq

from .core import (
    DomainError,
    GFunction,
    InvalidArgumentError,
    NumericalError,
    UnboundedSubproblemError,
    dual_base,
)
from .couplings import Bilinear, Bregman, Quadratic, Tensor

#: iterates beyond this norm signal a subproblem that is not level-bounded
DIVERGENCE_RADIUS = 1e8
MAX_HALVINGS = 60
MAX_BISECTIONS = 200


@dataclass(frozen=True)
class BackwardResult:
    x_plus: np.ndarray
    inner_residual: float
    solver_used: str


def subproblem_value(problem, y, x):
    """``g(x) − Φ(x, y)``; ``+inf`` outside the domain."""
    x = np.asarray(x, dtype=float)
    gv = problem.g(x)
    try:
        with np.errstate(invalid="ignore"):
            pv = problem.coupling.phi(x, y)
    except DomainError:
        return np.full(np.shape(gv), np.inf) if np.ndim(gv) else np.inf
    out = np.where(np.isinf(gv) | np.isneginf(pv), np.inf, gv - pv)
    return out if np.ndim(out) else float(out)


# -- closed forms ------------------------------------------------------------------


def _soft(v, t):
    return np.sign(v) * np.maximum(np.abs(v) - t, 0.0)


def _separable_prox(g, curvature, center_num):
    """Minimize ``½ a x² − m_num x + w|x − s|`` per coordinate over the box.

    ``a = curvature`` (vector, positive), ``m_num`` such that the smooth
    minimizer is ``m_num / a``.
    """
    m = center_num / curvature
    x = g.l1_center + _soft(m - g.l1_center, g.l1_weight / curvature)
    return np.clip(x, g.lower, g.upper)


def _cf_quadratic(problem, y):
    g, L = problem.g, problem.coupling.L
    y = np.asarray(y, dtype=float)
    if g.diagonal_quad:
        rho = np.diag(g.quad)
        return _separable_prox(g, rho + L, L * y - g.lin)
    A = g.quad + L * np.eye(problem.dim)
    return np.linalg.solve(A, L * y - g.lin)


def _cf_bilinear(problem, y):
    g = problem.g
    y = np.asarray(y, dtype=float)
    if g.diagonal_quad:
        return _separable_prox(g, np.diag(g.quad), y - g.lin)
    return np.linalg.solve(g.quad, y - g.lin)


def _cf_identity(problem, y):
    return np.array(y, dtype=float)


def _cf_bregman_linear(problem, y):
    c = problem.coupling
    return c.h.conj_grad(c.h.grad(np.asarray(y, dtype=float)) - problem.g.lin / c.L)


def _cf_aniso_linear(problem, y):
    c = problem.coupling
    return np.asarray(y, dtype=float) + c.h.conj_grad(-problem.g.lin) / c.L


def _cf_hoelder_zero(problem, y):
    c = problem.coupling
    r = np.linalg.norm(y.grad)
    if r == 0:
        return np.array(y.base, dtype=float)
    return y.base + (r / c.H) ** (1.0 / c.nu) * y.grad / r


def _cf_tensor_zero(problem, y):
    c = problem.coupling
    if c.p == 1:
        return y.base + y.grad / c.L_p
    return y.base + cubic_subproblem(-y.grad, -y.hess, c.L_p)


_SEPARABLE_KINDS = {"zero", "linear", "quadratic", "l1", "box", "l1+box",
                    "linear+l1", "linear+box", "linear+l1+box",
                    "quadratic+l1", "quadratic+box", "quadratic+l1+box"}

_CATALOG = {
    ("*", "Quadratic"): _cf_quadratic,
    ("smooth-sc", "Bilinear"): _cf_bilinear,
    ("zero", "Bregman"): _cf_identity,
    ("zero", "ReversedBregman"): _cf_identity,
    ("zero", "Anisotropic"): _cf_identity,
    ("zero", "L0L1"): _cf_identity,
    ("zero", "Hoelder"): _cf_hoelder_zero,
    ("zero", "Tensor"): _cf_tensor_zero,
    ("linear", "Bregman"): _cf_bregman_linear,
    ("linear", "Anisotropic"): _cf_aniso_linear,
}


def prox_catalog_lookup(g_kind, coupling_kind):
    """Closed-form backward solver for a ``(g kind, coupling kind)`` pair, or ``None``.

    ``g_kind`` uses the tags of :attr:`GFunction.kind`; for the bilinear
    coupling pass ``"quadratic"`` only when ``g`` is strongly convex.

    Examples
    --------
    >>> prox_catalog_lookup("l1", "Quadratic") is not None
    True
    >>> prox_catalog_lookup("l1", "Bregman") is None
    True
    """
    if coupling_kind == "Quadratic":
        return _CATALOG[("*", "Quadratic")] if g_kind in _SEPARABLE_KINDS else None
    if coupling_kind == "Bilinear":
        if g_kind in ("quadratic", "quadratic+l1", "quadratic+box", "quadratic+l1+box"):
            return _CATALOG[("smooth-sc", "Bilinear")]
        return None
    return _CATALOG.get((g_kind, coupling_kind))


def _closed_form(problem, y):
    g, c = problem.g, problem.coupling
    if not isinstance(g, GFunction):
        return None
    kind = g.kind
    if isinstance(c, Bilinear):
        if not g.has_quad or np.min(np.linalg.eigvalsh(g.quad)) <= 0:
            return None
        if (g.has_l1 or g.has_box) and not g.diagonal_quad:
            return None
    if isinstance(c, Quadratic) and (g.has_l1 or g.has_box) and not g.diagonal_quad:
        return None
    solver = prox_catalog_lookup(kind, c.kind)
    if solver is None and kind.endswith("box") and not isinstance(c, (Quadratic, Bilinear)):
        # the subproblem is convex here, so an unconstrained minimizer inside
        # the box is also the constrained one
        inner = prox_catalog_lookup(kind[:-4].rstrip("+") or "zero", c.kind)
        if inner is not None:
            def solver(problem, y, _inner=inner):
                x = np.asarray(_inner(problem, y), dtype=float)
                return x if bool(problem.g.in_box(x)) else None
    return solver


# -- cubic subproblem ---------------------------------------------------------------


def cubic_subproblem(grad, hess, M):
    """Global minimizer of ``⟨grad, s⟩ + ½⟨s, hess s⟩ + (M/6)‖s‖³``.

    Uses an eigendecomposition of ``hess`` and bisection on the secular
    equation ``‖s(r)‖ = r`` with ``s(r) = −(hess + (M/2) r I)^{-1} grad``.

    Examples
    --------
    >>> float(cubic_subproblem([-1.0], [[0.0]], 6.0)[0])  # doctest: +ELLIPSIS
    0.577350269189...
    """
    g = np.atleast_1d(np.asarray(grad, dtype=float))
    H = np.atleast_2d(np.asarray(hess, dtype=float))
    M = float(M)
    if not M > 0:
        raise InvalidArgumentError("cubic regularization weight must be positive")
    lam, V = np.linalg.eigh(0.5 * (H + H.T))
    gh = V.T @ g
    gnorm = np.linalg.norm(g)
    lmin = lam[0]
    r_min = max(0.0, -2.0 * lmin / M)
    scale = max(1.0, np.max(np.abs(lam)), gnorm)

    def s_of(r):
        return -gh / (lam + 0.5 * M * r)

    def phi(r):
        with np.errstate(divide="ignore", invalid="ignore"):
            d = lam + 0.5 * M * r
            v = np.where(d > 0, gh / d, np.where(gh == 0, 0.0, np.inf))
        return np.linalg.norm(v) - r

    # hard case: the gradient has no weight on the bottom eigenspace
    bottom = lam <= lmin + 1e-14 * scale
    if np.all(np.abs(gh[bottom]) <= 1e-14 * max(1.0, gnorm)):
        sh = np.zeros_like(gh)
        top = ~bottom
        sh[top] = -gh[top] / (lam[top] + 0.5 * M * r_min)
        rest = r_min**2 - sh @ sh
        if rest >= 0 and r_min > 0:
            sh[np.argmax(bottom)] += np.sqrt(rest)
            return V @ sh
        if r_min == 0 and gnorm == 0:
            return np.zeros_like(g)

    lo = r_min
    hi = r_min + max(1.0, np.sqrt(2.0 * gnorm / M))
    while phi(hi) > 0:
        hi *= 2.0
        if hi > DIVERGENCE_RADIUS:
            raise NumericalError("cubic subproblem: secular equation has no bracket")
    for _ in range(MAX_BISECTIONS):
        mid = 0.5 * (lo + hi)
        if mid <= lo or mid >= hi:
            break
        if phi(mid) > 0:
            lo = mid
        else:
            hi = mid
    s = V @ s_of(hi)
    res = np.linalg.norm(g + H @ s + 0.5 * M * np.linalg.norm(s) * s)
    if res > 1e-10 * (1.0 + gnorm):
        # one Newton polish on the first-order system
        r = np.linalg.norm(s)
        J = H + 0.5 * M * (r * np.eye(len(g)) + (np.outer(s, s) / r if r > 0 else 0.0))
        try:
            s2 = s - np.linalg.solve(J, g + H @ s + 0.5 * M * r * s)
        except np.linalg.LinAlgError:
            s2 = s
        res2 = np.linalg.norm(g + H @ s2 + 0.5 * M * np.linalg.norm(s2) * s2)
        if res2 < res:
            s, res = s2, res2
        if res > 1e-10 * (1.0 + gnorm):
            raise NumericalError(f"cubic subproblem residual {res:.3e} above tolerance")
    return s


# -- numeric fallback -------------------------------------------------------------


def _coordinate_options(g, i):
    """Per-coordinate cells: ``("fix", p)`` at kinks, ``("free", a, b)`` between them."""
    pts = g.kinks(i)
    lo, hi = g.lower[i], g.upper[i]
    edges = [lo] + [p for p in pts if lo < p < hi] + [hi]
    opts = [("fix", p) for p in pts if lo <= p <= hi]
    for a, b in zip(edges[:-1], edges[1:]):
        if a < b:
            opts.append(("free", a, b))
    return opts


class _Cell:
    def __init__(self, problem, y, options):
        self.problem = problem
        self.y = y
        g = problem.g
        n = problem.dim
        self.fixed = np.array([o[0] == "fix" for o in options])
        self.free = np.flatnonzero(~self.fixed)
        self.a = np.array([o[1] for o in options])
        self.b = np.array([o[2] if o[0] == "free" else o[1] for o in options])
        # the l1 kink is an interval edge, so the sign is constant on free cells
        self.sign = np.zeros(n)
        for i in range(n):
            if options[i][0] == "free" and g.l1_weight[i] > 0:
                self.sign[i] = 1.0 if options[i][1] >= g.l1_center[i] else -1.0

    def point(self, z):
        x = self.a.copy()
        x[self.free] = z
        return x

    def ext_value(self, z):
        x = self.point(z)
        g = self.problem.g
        v = g.smooth_value(x) + np.sum(g.l1_weight * np.abs(x - g.l1_center) * self.fixed)
        v = v + np.sum((g.l1_weight * self.sign * (x - g.l1_center))[self.free])
        try:
            with np.errstate(invalid="ignore"):
                p = float(self.problem.coupling.phi(x, self.y))
        except DomainError:
            return np.inf
        if not np.isfinite(p) or not np.isfinite(v):
            return np.inf
        return float(v - p)

    def ext_grad(self, z):
        x = self.point(z)
        g = self.problem.g
        gr = g.smooth_grad(x) + g.l1_weight * self.sign - self.problem.coupling.grad_x(x, self.y)
        return gr[self.free]

    def ext_hess(self, z):
        x = self.point(z)
        H = self.problem.g.smooth_hess(x) - self.problem.coupling.hess_x(x, self.y)
        return H[np.ix_(self.free, self.free)]

    def inside(self, z, tol):
        a, b = self.a[self.free], self.b[self.free]
        return bool(np.all(z >= a - tol) and np.all(z <= b + tol))


def _safe_grad(cell, z):
    try:
        gr = cell.ext_grad(z)
    except DomainError:
        return None
    return gr if np.all(np.isfinite(gr)) else None


def _solve_1d(cell, z0, tol):
    a, b = cell.a[cell.free][0], cell.b[cell.free][0]

    def d(t):
        gr = _safe_grad(cell, np.array([t]))
        return None if gr is None else float(gr[0])

    t0 = float(np.clip(z0[0], a, b))
    if not np.isfinite(t0):
        t0 = 0.0
    if t0 in (a, b) and np.isfinite(a) and np.isfinite(b):
        t0 = 0.5 * (a + b)
    d0 = d(t0)
    if d0 is None:
        return None
    if d0 == 0:
        return np.array([t0])
    direction = -1.0 if d0 > 0 else 1.0
    end = a if direction < 0 else b
    step = max(1.0, abs(t0)) * 1e-3
    prev = t0
    while True:
        t = prev + direction * step
        if (direction < 0 and t <= end) or (direction > 0 and t >= end):
            if not np.isfinite(end):
                raise UnboundedSubproblemError("backward subproblem diverges")
            t = end
        dt = d(t)
        if dt is None:
            # left the domain of the coupling: shrink toward prev
            step *= 0.5
            if step < 1e-300:
                return None
            continue
        if np.sign(dt) != np.sign(d0) or dt == 0:
            break
        if t == end:
            return None
        if abs(t) > DIVERGENCE_RADIUS:
            raise UnboundedSubproblemError("backward subproblem diverges")
        prev = t
        step *= 2.0
    lo, hi = sorted((prev, t))
    if dt == 0:
        return np.array([t])
    root = brentq(lambda s: d(s), lo, hi, xtol=1e-15, rtol=4 * np.finfo(float).eps, maxiter=500)
    return np.array([root])


def _solve_newton(cell, z0, tol):
    z = np.array(z0, dtype=float)
    a, b = cell.a[cell.free], cell.b[cell.free]
    with np.errstate(invalid="ignore"):
        z = np.where(np.isfinite(a) & (z <= a), a + 1e-3 * np.maximum(1.0, np.abs(a)), z)
        z = np.where(np.isfinite(b) & (z >= b), b - 1e-3 * np.maximum(1.0, np.abs(b)), z)
    val = cell.ext_value(z)
    if not np.isfinite(val):
        return None
    best_gn = np.inf
    for _ in range(200):
        gr = _safe_grad(cell, z)
        if gr is None:
            return None
        gn = np.linalg.norm(gr, np.inf)
        if gn <= tol * 1e-3:
            return z
        try:
            H = cell.ext_hess(z)
        except DomainError:
            return None
        H = 0.5 * (H + H.T)
        if not np.all(np.isfinite(H)):
            return None
        w = np.linalg.eigvalsh(H)
        shift = 0.0 if w[0] > 1e-12 * max(1.0, abs(w[-1])) else (1e-8 - w[0]) + 1e-8 * abs(w[-1])
        step = -np.linalg.solve(H + shift * np.eye(len(z)), gr)
        t = 1.0
        slope = gr @ step
        for _ in range(MAX_HALVINGS):
            zn = z + t * step
            vn = cell.ext_value(zn)
            if vn <= val + 1e-4 * t * slope:
                break
            t *= 0.5
        else:
            # no decrease available: accept if already stationary to tolerance
            return z if gn <= tol else None
        if np.linalg.norm(zn) > DIVERGENCE_RADIUS:
            raise UnboundedSubproblemError("backward subproblem diverges")
        if vn == val and gn >= best_gn:
            return z if gn <= tol else None
        best_gn = min(best_gn, gn)
        z, val = zn, vn
    gr = _safe_grad(cell, z)
    return z if gr is not None and np.linalg.norm(gr, np.inf) <= tol else None


def inner_residual(problem, y, x):
    """Coordinatewise first-order residual of the backward subproblem at ``x``.

    At a kink or box bound of coordinate ``i`` this is the distance of
    ``∂_i Φ − ∂_i g_smooth`` from the interval of one-sided derivatives of the
    nonsmooth part; elsewhere it is ``|∂_i ψ|``.
    """
    g, c = problem.g, problem.coupling
    x = np.asarray(x, dtype=float)
    try:
        dphi = c.grad_x(x, y)
    except DomainError:
        return np.inf
    if isinstance(g, GFunction):
        t = dphi - g.smooth_grad(x)
        res = 0.0
        for i in range(problem.dim):
            lo, hi = g.one_sided(x, i)
            res = max(res, max(lo - t[i], t[i] - hi, 0.0))
        return float(res)
    return float(np.linalg.norm(np.asarray(g.grad(x)) - dphi, np.inf))


def _numeric(problem, y, tol):
    g = problem.g
    n = problem.dim
    z_init = dual_base(y)
    if not isinstance(g, GFunction):
        if g.grad is None or g.hess is None:
            raise InvalidArgumentError("numeric backward step needs a structured g or its derivatives")
        raise InvalidArgumentError("unstructured g is not supported by the backward solver")
    opts = [_coordinate_options(g, i) for i in range(n)]
    best = None
    diverged = False
    for combo in itertools.product(*opts):
        cell = _Cell(problem, y, combo)
        k = len(cell.free)
        try:
            if k == 0:
                z = np.zeros(0)
                solver = "ClosedForm"
            elif k == 1:
                z = _solve_1d(cell, z_init[cell.free], tol)
                solver = "Newton1D"
            else:
                z = _solve_newton(cell, z_init[cell.free], tol)
                solver = "DampedNewton"
        except UnboundedSubproblemError:
            diverged = True
            continue
        if z is None or not cell.inside(z, 1e-12 * (1 + np.linalg.norm(z))):
            continue
        if k:
            a, b = cell.a[cell.free], cell.b[cell.free]
            z = np.clip(z, a, b)
        x = cell.point(z)
        val = subproblem_value(problem, y, x)
        if not np.isfinite(val):
            continue
        key = (val, tuple(x))
        if best is None or key < best[0]:
            best = (key, x, solver)
    if best is None:
        if diverged:
            raise UnboundedSubproblemError("backward subproblem is not level-bounded")
        raise NumericalError("backward step: no cell produced a minimizer")
    x = best[1]
    solvers = {best[2]}
    solver = "DampedNewton" if "DampedNewton" in solvers else best[2]
    if solver == "ClosedForm":
        solver = "Newton1D" if n == 1 else "DampedNewton"
    return x, solver


def backward_step(problem, y, inner_tol=1e-10):
    """Solve ``argmin_{x ∈ X} g(x) − Φ(x, y)``.

    Parameters
    ----------
    problem : Problem
    y : dual point
    inner_tol : float
        Tolerance on the first-order residual of numeric solves.

    Returns
    -------
    BackwardResult

    Raises
    ------
    UnboundedSubproblemError
        When iterates exceed the divergence radius.
    DomainError
        When the coupling is undefined at ``y``.
    """
    c = problem.coupling
    y = c.check_y(y, problem.dim)
    if isinstance(c, Bregman) and not np.all(c.h.in_interior(np.asarray(y))):
        raise DomainError("backward step: y outside int dom h")
    solver = _closed_form(problem, y)
    x = solver(problem, y) if solver is not None else None
    if x is not None:
        x = np.asarray(x, dtype=float)
        if not np.all(np.isfinite(x)) or np.linalg.norm(x) > DIVERGENCE_RADIUS:
            raise UnboundedSubproblemError("backward closed form diverged")
        if isinstance(c, Tensor) and c.p == 2:
            return BackwardResult(x, inner_residual(problem, y, x), "CubicSecular")
        return BackwardResult(x, 0.0, "ClosedForm")
    if isinstance(c, Bilinear) and isinstance(problem.g, GFunction) and not problem.g.has_quad:
        if not (np.all(np.isfinite(problem.g.lower)) and np.all(np.isfinite(problem.g.upper))):
            raise UnboundedSubproblemError("bilinear subproblem with g lacking curvature")
    x, used = _numeric(problem, y, inner_tol)
    res = inner_residual(problem, y, x)
    if res > inner_tol:
        raise NumericalError(f"backward step residual {res:.3e} above tolerance {inner_tol:.1e}")
    return BackwardResult(x, res, used)
