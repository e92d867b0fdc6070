"""Desk-scale verification: grid oracles, rate certificates and gap identities."""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .backward import backward_step, subproblem_value
from .core import DomainError, GFunction, InvalidArgumentError, as_point
from .couplings import Bilinear, Bregman, Quadratic
from .driver import compute_gaps, phi_bregman_div
from .forward import forward_step
from .references import SquaredNorm

MAX_NODES = 10_000_000
_CHUNK = 1 << 20


@dataclass(frozen=True)
class Grid:
    """Uniform tensor grid in dimension 1 or 2.

    Nodes are ``lower + i * spacing`` up to ``upper``; flattened order is
    lexicographic in the coordinates.
    """

    lower: np.ndarray
    upper: np.ndarray
    spacing: float

    def __post_init__(self):
        lo = np.atleast_1d(np.asarray(self.lower, dtype=float))
        hi = np.atleast_1d(np.asarray(self.upper, dtype=float))
        object.__setattr__(self, "lower", lo)
        object.__setattr__(self, "upper", hi)
        if lo.shape != hi.shape or lo.ndim != 1 or not 1 <= lo.size <= 2:
            raise InvalidArgumentError("grids are limited to dimension 1 or 2")
        if not self.spacing > 0 or np.any(hi < lo) or not np.all(np.isfinite(lo) & np.isfinite(hi)):
            raise InvalidArgumentError("invalid grid bounds or spacing")
        if np.prod(self.shape) > MAX_NODES:
            raise InvalidArgumentError(f"grid has more than {MAX_NODES} nodes")

    @property
    def dim(self):
        return self.lower.size

    @property
    def shape(self):
        return tuple(int(np.floor((h - l) / self.spacing + 1e-9)) + 1 for l, h in zip(self.lower, self.upper))

    def axes(self):
        return [l + self.spacing * np.arange(m) for l, m in zip(self.lower, self.shape)]

    def points(self):
        mesh = np.meshgrid(*self.axes(), indexing="ij")
        return np.stack([m.ravel() for m in mesh], axis=-1)

    def chunks(self):
        pts = self.points()
        for start in range(0, len(pts), _CHUNK):
            yield pts[start:start + _CHUNK]


def _clean(v):
    v = np.asarray(v, dtype=float)
    return np.where(np.isnan(v), -np.inf, v)


def grid_conjugate(func, coupling, y, grid):
    """``max_x Φ(x, y) − func(x)`` over the grid nodes."""
    best = -np.inf
    for pts in grid.chunks():
        with np.errstate(invalid="ignore", over="ignore"):
            v = _clean(coupling.phi(pts, y) - func(pts))
        best = max(best, float(np.max(v)))
    return best


def grid_biconjugate(func, coupling, x_grid, y_grid):
    """Grid ``f^{ΦΦ}`` at the nodes of ``x_grid``, vector-valued duals only.

    Returns
    -------
    xs : ndarray, shape (N, d)
    values : ndarray, shape (N,)
    """
    xs = x_grid.points()
    fx = np.asarray(func(xs), dtype=float)
    ys = y_grid.points()
    conj = np.empty(len(ys))
    with np.errstate(invalid="ignore", over="ignore"):
        for j, y in enumerate(ys):
            conj[j] = np.max(_clean(coupling.phi(xs, y) - fx))
        out = np.full(len(xs), -np.inf)
        for j, y in enumerate(ys):
            np.maximum(out, _clean(coupling.phi(xs, y) - conj[j]), out=out)
    return xs, out


def grid_backward(problem, y, grid):
    """Lexicographically smallest grid minimizer of ``g − Φ(·, y)``."""
    best_val, best_x = np.inf, None
    for pts in grid.chunks():
        with np.errstate(invalid="ignore", over="ignore"):
            v = np.asarray(subproblem_value(problem, y, pts), dtype=float)
        v = np.where(np.isnan(v), np.inf, v)
        i = int(np.argmin(v))
        if v[i] < best_val:
            best_val, best_x = v[i], pts[i].copy()
    if best_x is None:
        raise InvalidArgumentError("subproblem is +inf on the whole grid")
    return best_x


def verify_phi_subgradient(f, coupling, x_bar, y, grid, eps=0.0):
    """Largest violation of ``f(x) ≥ f(x̄) + Φ(x, y) − Φ(x̄, y) − ε`` on the grid."""
    x_bar = np.atleast_1d(np.asarray(x_bar, dtype=float))
    base = float(f(x_bar)) - float(coupling.phi(x_bar, y)) - eps
    worst = -np.inf
    for pts in grid.chunks():
        with np.errstate(invalid="ignore", over="ignore"):
            fv = np.asarray(f(pts), dtype=float)
            v = base + coupling.phi(pts, y) - fv
        v = np.where(np.isnan(v) | np.isposinf(fv), -np.inf, v)
        worst = max(worst, float(np.max(v)))
    return worst


def check_decrease_identity(trace):
    """Largest ``|decrease_residual|`` over records with finite values."""
    r = np.array([rec.decrease_residual for rec in trace.records], dtype=float)
    r = r[np.isfinite(r)]
    return float(np.max(np.abs(r))) if r.size else 0.0


@dataclass(frozen=True)
class RateCertificate:
    """Outcome of a rate check. ``kind`` is QLinear, SublinearEnvelope or PLEstimate."""

    kind: str
    fields: dict = field(default_factory=dict)
    passed: bool = False

    def as_dict(self):
        return {"kind": self.kind, "passed": bool(self.passed), **{k: _jsonable(v) for k, v in self.fields.items()}}


def _jsonable(v):
    if isinstance(v, (np.floating, float)):
        return float(v)
    if isinstance(v, (np.integer, int)) and not isinstance(v, bool):
        return int(v)
    return v


def certify_q_linear(trace, inf_F, mu1, mu2=0.0, estimated=False, tol=1e-10):
    """Compare the worst ratio ``(F_{k+1} − F*)/(F_k − F*)`` with ``(1 − μ₁)/(1 + μ₂)``.

    Pairs whose denominator underflows are skipped. With an estimated ``inf_F``
    the certificate is refused once ``F − inf_F < 1e-12``.
    """
    F = trace.F_values()
    F = F[np.isfinite(F)]
    gaps = F - inf_F
    if np.any(gaps < -1e-12 * (1 + abs(inf_F))):
        raise InvalidArgumentError("inf_F lies above an observed objective value")
    if estimated and np.any(gaps[:-1] < 1e-12):
        return RateCertificate("QLinear", {"worst_ratio": np.nan, "bound": (1 - mu1) / (1 + mu2),
                                           "refused": "estimated inf_F too close to F"}, False)
    bound = (1.0 - mu1) / (1.0 + mu2)
    worst = 0.0
    pairs = 0
    for a, b in zip(gaps[:-1], gaps[1:]):
        if a <= np.finfo(float).tiny:
            continue
        worst = max(worst, max(b, 0.0) / a)
        pairs += 1
    return RateCertificate("QLinear", {"worst_ratio": worst, "bound": bound, "pairs": pairs},
                           bool(worst <= bound + tol))


def estimate_pl_constants(problem, samples, inf_F, inner_tol=1e-10):
    """Empirical ``μ₁ = min (gap sum)/(F(x̄) − inf F)`` with ``μ₂ = 0``."""
    from .core import eval_F

    ratios = []
    for x in samples:
        x = as_point(x, problem.dim)
        Fx = eval_F(problem, x)
        if not np.isfinite(Fx) or Fx - inf_F <= 1e-14 * (1 + abs(inf_F)):
            continue
        y = forward_step(problem, x)
        xp = backward_step(problem, y, inner_tol).x_plus
        gp, gd = compute_gaps(problem, x, y, xp)
        ratios.append((gp + gd) / (Fx - inf_F))
    if not ratios:
        raise InvalidArgumentError("no admissible samples for PL estimation")
    return float(min(ratios)), 0.0


def check_sublinear_envelope(trace, bound, inf_F, tol=1e-9):
    """Largest ``F(x^K) − inf F − bound(K)`` over ``K ≥ 1``."""
    F = trace.F_values()
    K = np.arange(len(F))
    viol = [F[k] - inf_F - bound(k) for k in K[1:]]
    worst = float(max(viol)) if viol else 0.0
    return RateCertificate("SublinearEnvelope", {"max_violation": worst, "checked": len(viol)},
                           bool(worst <= tol))


def hoelder_bound(H, nu, r0):
    """``K ↦ (ν+1)^ν H r0^{ν+1} / K^ν`` for averaged Hölder steps."""
    return lambda K: (nu + 1.0) ** nu * H * r0 ** (nu + 1.0) / K**nu


def tensor_bound(p, L_p, r0):
    """``K ↦ 2 (p+1)^p L_p r0^{p+1} / K^p`` for averaged tensor steps."""
    return lambda K: 2.0 * (p + 1.0) ** p * L_p * r0 ** (p + 1.0) / K**p


def aniso_bound(L, L_h, r0):
    """``K ↦ 2 L L_h r0² / K`` for averaged anisotropic steps."""
    return lambda K: 2.0 * L * L_h * r0**2 / K


def three_point_residual(problem, x, x_k, x_next):
    """``⟨∇f(x⁺) − ∇ₓΦ(x⁺, ȳ), x − x⁺⟩ − [D(x, x_k) − D(x, x⁺) − D(x⁺, x_k)]``.

    ``ȳ = ∇_Φ f(x_k)`` and ``D`` is the Φ-Bregman divergence of ``f``. A value
    ``≤ 0`` (up to rounding) means the three-point inequality holds.
    """
    x = as_point(x, problem.dim)
    x_k = as_point(x_k, problem.dim)
    x_next = as_point(x_next, problem.dim)
    if problem.f.grad is None:
        raise DomainError("three-point check needs the gradient of f")
    y = forward_step(problem, x_k)
    lhs = (np.asarray(problem.f.grad(x_next)) - problem.coupling.grad_x(x_next, y)) @ (x - x_next)
    rhs = (phi_bregman_div(problem, x, x_k) - phi_bregman_div(problem, x, x_next)
           - phi_bregman_div(problem, x_next, x_k))
    return float(lhs - rhs)


def _smooth_parts(g, pts):
    if isinstance(g, GFunction):
        if g.has_l1:
            raise InvalidArgumentError("gap-form check needs a smooth g")
        for p in pts:
            if not np.all((p > g.lower) & (p < g.upper)):
                raise InvalidArgumentError("gap-form check needs points inside the box of g")
        return g.smooth_value, g.smooth_grad
    if g.grad is None:
        raise InvalidArgumentError("gap-form check needs the gradient of g")
    return (lambda x: float(g(x))), g.grad


def _bregman(val, grad, a, b):
    return float(val(a) - val(b) - np.asarray(grad(b)) @ (a - b))


def dca_gap_form_check(problem, x_bar, inner_tol=1e-10):
    """Gap values against their Bregman-distance forms at one step from ``x̄``.

    Bilinear coupling: ``gap_primal = D_g(x̄, x⁺)`` and ``gap_dual = D_f(x⁺, x̄)``.
    Quadratic or Bregman coupling with reference ``h`` and weight ``L``:
    ``gap_primal = D_{g + Lh}(x̄, x⁺)`` and ``gap_dual = D_{Lh + f}(x⁺, x̄)``.

    Returns
    -------
    tuple
        ``(lhs_primal, rhs_primal, lhs_dual, rhs_dual)``.
    """
    c = problem.coupling
    if isinstance(c, Bilinear):
        L, h = 0.0, SquaredNorm()
    elif isinstance(c, Quadratic):
        L, h = c.L, SquaredNorm()
    elif isinstance(c, Bregman):
        L, h = c.L, c.h
    else:
        raise InvalidArgumentError("gap-form check supports Bilinear, Quadratic and Bregman couplings")
    x_bar = as_point(x_bar, problem.dim)
    y = forward_step(problem, x_bar)
    xp = backward_step(problem, y, inner_tol).x_plus
    gp, gd = compute_gaps(problem, x_bar, y, xp)
    gval, ggrad = _smooth_parts(problem.g, [x_bar, xp])
    fval = lambda x: float(problem.f(x))
    hval = lambda x: float(h.value(x))
    rhs_p = _bregman(gval, ggrad, x_bar, xp) + (L * _bregman(hval, h.grad, x_bar, xp) if L else 0.0)
    rhs_d = _bregman(fval, problem.f.grad, xp, x_bar) + (L * _bregman(hval, h.grad, xp, x_bar) if L else 0.0)
    return gp, rhs_p, gd, rhs_d
