"""Shared domain types: errors, extended reals, dual points, problems and traces."""

from __future__ import annotations

import dataclasses
from dataclasses import dataclass, field
from typing import Callable, Optional

import numpy as np

INF = np.inf


class PhiDCAError(Exception):
    """Base class of all library errors."""


class DomainError(PhiDCAError):
    """A point left the domain where a map is defined."""


class NumericalError(PhiDCAError):
    """A factorization or root find failed."""


class UnboundedSubproblemError(PhiDCAError):
    """The backward subproblem appears not to be level-bounded."""


class InvalidArgumentError(PhiDCAError, ValueError):
    """Shapes or parameters are inconsistent."""


class ConfigError(PhiDCAError):
    """A run configuration failed validation."""


def ext_add(a, b):
    """Extended-real sum where ``+inf`` absorbs and ``inf - inf = +inf``."""
    a = float(a)
    b = float(b)
    if a == INF or b == INF:
        return INF
    return a + b


def ext_sub(a, b):
    """Extended-real difference ``a - b`` with ``(+inf) - (+inf) = +inf``."""
    a = float(a)
    b = float(b)
    if a == INF:
        return INF
    return a - b


def as_point(x, dim=None):
    """Return ``x`` as a finite 1-D float array, checking its dimension."""
    x = np.atleast_1d(np.asarray(x, dtype=float))
    if x.ndim != 1:
        raise InvalidArgumentError(f"point must be one-dimensional, got shape {x.shape}")
    if dim is not None and x.shape[0] != dim:
        raise InvalidArgumentError(f"point has dimension {x.shape[0]}, expected {dim}")
    if not np.all(np.isfinite(x)):
        raise InvalidArgumentError("point has non-finite entries")
    return x


# -- dual points ---------------------------------------------------------------


@dataclass(frozen=True)
class DualPair:
    """Dual point ``(y1, y2)``: a base point and a gradient."""

    base: np.ndarray
    grad: np.ndarray

    def as_tuple(self):
        return (self.base, self.grad)


@dataclass(frozen=True)
class DualTriple:
    """Dual point ``(y1, Y2, Y3)``: base point, gradient and symmetric Hessian."""

    base: np.ndarray
    grad: np.ndarray
    hess: np.ndarray

    def __post_init__(self):
        H = np.asarray(self.hess, dtype=float)
        scale = max(1.0, float(np.max(np.abs(H)))) if H.size else 1.0
        if H.shape != (self.base.shape[0],) * 2:
            raise InvalidArgumentError("Hessian block has the wrong shape")
        if np.max(np.abs(H - H.T), initial=0.0) > 1e-12 * scale:
            raise InvalidArgumentError("Hessian block is not symmetric")

    def as_tuple(self):
        return (self.base, self.grad, self.hess)


def dual_base(y):
    """Base point of a dual point, used as the initial guess of numeric solvers."""
    if isinstance(y, (DualPair, DualTriple)):
        return np.asarray(y.base, dtype=float)
    return np.asarray(y, dtype=float)


def dual_flat(y):
    """Flatten a dual point into one vector (for serialization and comparison)."""
    if isinstance(y, (DualPair, DualTriple)):
        return np.concatenate([np.ravel(p) for p in y.as_tuple()])
    return np.ravel(np.asarray(y, dtype=float))


# -- function oracles ------------------------------------------------------------


@dataclass(frozen=True)
class Oracle:
    """A smooth (or piecewise smooth) function with derivative oracles.

    ``value`` accepts arrays of shape ``(..., n)`` and returns shape ``(...)``;
    ``grad`` and ``hess`` act on a single point.
    """

    value: Callable
    grad: Optional[Callable] = None
    hess: Optional[Callable] = None
    name: str = ""

    def __call__(self, x):
        return self.value(x)


def zero_oracle(dim):
    return Oracle(
        value=lambda x: np.zeros(np.shape(x)[:-1]),
        grad=lambda x: np.zeros(dim),
        hess=lambda x: np.zeros((dim, dim)),
        name="zero",
    )


@dataclass(frozen=True)
class GFunction:
    """Structured convex ``g``.

    ``g(x) = ½⟨x, Q x⟩ + ⟨b, x⟩ + c + Σ w_i |x_i − s_i| + δ_box(x)``.

    Parameters
    ----------
    dim : int
    quad : ndarray, optional
        Symmetric positive semidefinite ``(n, n)`` matrix ``Q``.
    lin : ndarray, optional
    const : float
    l1_weight, l1_center : ndarray, optional
        Weights ``w ≥ 0`` and kink locations ``s`` of the separable absolute values.
    lower, upper : ndarray, optional
        Box bounds, ``±inf`` allowed.
    """

    dim: int
    quad: Optional[np.ndarray] = None
    lin: Optional[np.ndarray] = None
    const: float = 0.0
    l1_weight: Optional[np.ndarray] = None
    l1_center: Optional[np.ndarray] = None
    lower: Optional[np.ndarray] = None
    upper: Optional[np.ndarray] = None

    def __post_init__(self):
        n = self.dim

        def vec(v, fill):
            if v is None:
                return np.full(n, fill, dtype=float)
            return np.broadcast_to(np.asarray(v, dtype=float), (n,)).copy()

        Q = np.zeros((n, n)) if self.quad is None else np.asarray(self.quad, dtype=float)
        if np.ndim(Q) == 1:
            Q = np.diag(Q)
        Q = np.broadcast_to(Q, (n, n)).copy()
        object.__setattr__(self, "quad", Q)
        object.__setattr__(self, "lin", vec(self.lin, 0.0))
        object.__setattr__(self, "l1_weight", vec(self.l1_weight, 0.0))
        object.__setattr__(self, "l1_center", vec(self.l1_center, 0.0))
        object.__setattr__(self, "lower", vec(self.lower, -INF))
        object.__setattr__(self, "upper", vec(self.upper, INF))
        if np.any(self.l1_weight < 0):
            raise InvalidArgumentError("l1 weights must be nonnegative")
        if np.any(self.lower > self.upper):
            raise InvalidArgumentError("empty box")
        if np.max(np.abs(Q - Q.T), initial=0.0) > 1e-12 * max(1.0, np.max(np.abs(Q))):
            raise InvalidArgumentError("quadratic term must be symmetric")

    # structure tags used by the closed-form catalog
    @property
    def has_quad(self):
        return bool(np.any(self.quad != 0))

    @property
    def diagonal_quad(self):
        Q = self.quad
        return bool(np.all(Q == np.diag(np.diag(Q))))

    @property
    def has_l1(self):
        return bool(np.any(self.l1_weight > 0))

    @property
    def has_box(self):
        return bool(np.any(np.isfinite(self.lower)) or np.any(np.isfinite(self.upper)))

    @property
    def kind(self):
        """Coarse structural tag: zero, linear, quadratic, l1, box or l1+box."""
        if self.has_quad:
            base = "quadratic"
        elif np.any(self.lin != 0) or self.const != 0:
            base = "linear"
        else:
            base = "zero"
        parts = []
        if self.has_l1:
            parts.append("l1")
        if self.has_box:
            parts.append("box")
        if not parts:
            return base
        if base == "zero":
            return "+".join(parts)
        return base + "+" + "+".join(parts)

    def in_box(self, x):
        x = np.asarray(x, dtype=float)
        return np.all((x >= self.lower) & (x <= self.upper), axis=-1)

    def smooth_value(self, x):
        x = np.asarray(x, dtype=float)
        quad = 0.5 * np.einsum("...i,ij,...j->...", x, self.quad, x)
        return quad + x @ self.lin + self.const

    def value(self, x):
        x = np.asarray(x, dtype=float)
        v = self.smooth_value(x) + np.sum(self.l1_weight * np.abs(x - self.l1_center), axis=-1)
        return np.where(self.in_box(x), v, INF)

    __call__ = value

    def smooth_grad(self, x):
        return self.quad @ np.asarray(x, dtype=float) + self.lin

    def smooth_hess(self, x=None):
        return self.quad.copy()

    def kinks(self, i):
        """Sorted nonsmooth locations of coordinate ``i`` (l1 kink and box bounds)."""
        pts = []
        if self.l1_weight[i] > 0:
            pts.append(self.l1_center[i])
        for b in (self.lower[i], self.upper[i]):
            if np.isfinite(b):
                pts.append(b)
        return sorted(set(pts))

    def one_sided(self, x, i):
        """Left and right derivatives of the nonsmooth part along coordinate ``i``.

        Box bounds contribute ``-inf`` on the left at the lower bound and ``+inf``
        on the right at the upper bound.
        """
        xi = x[i]
        w, s = self.l1_weight[i], self.l1_center[i]
        if w > 0 and xi == s:
            lo, hi = -w, w
        elif w > 0:
            lo = hi = w * np.sign(xi - s)
        else:
            lo = hi = 0.0
        if xi <= self.lower[i]:
            lo = -INF
        if xi >= self.upper[i]:
            hi = INF
        return lo, hi


@dataclass(frozen=True)
class Problem:
    """Minimize ``F = g − f`` under a coupling.

    Attributes
    ----------
    f : Oracle
        The Φ-convex part, entering with a minus sign.
    g : GFunction or Oracle
        The part handled by the backward step. A ``GFunction`` also defines
        the domain ``X`` through its box.
    coupling : Coupling
    dim : int
    known_inf_F : float, optional
    known_minimizer : ndarray, optional
    grid_lower, grid_upper : ndarray, optional
        Box used by grid oracles.
    """

    f: Oracle
    g: object
    coupling: object
    dim: int
    known_inf_F: Optional[float] = None
    known_minimizer: Optional[np.ndarray] = None
    name: str = ""
    grid_lower: Optional[np.ndarray] = None
    grid_upper: Optional[np.ndarray] = None
    meta: dict = field(default_factory=dict)

    def with_coupling(self, coupling):
        return dataclasses.replace(self, coupling=coupling)

    @property
    def lower(self):
        return getattr(self.g, "lower", np.full(self.dim, -INF))

    @property
    def upper(self):
        return getattr(self.g, "upper", np.full(self.dim, INF))


def eval_F(problem, x):
    """Evaluate ``F(x) = g(x) − f(x)`` in extended arithmetic.

    Examples
    --------
    >>> from phidca.fixtures import get_fixture
    >>> eval_F(get_fixture("quad-1d"), [2.0])
    2.0
    """
    x = np.atleast_1d(np.asarray(x, dtype=float))
    if x.shape != (problem.dim,):
        raise InvalidArgumentError(f"point has shape {x.shape}, expected ({problem.dim},)")
    gv = float(problem.g(x))
    if gv == INF:
        return INF
    fv = float(problem.f(x))
    return ext_sub(gv, fv)


# -- traces --------------------------------------------------------------------


@dataclass(frozen=True)
class IterationRecord:
    """State of one Φ-DCA step ``x^k → y^k → x^{k+1}``.

    ``x`` is the iterate ``x^k``; ``w`` is the averaged anchor used by the
    forward step (``None`` for the plain scheme).
    """

    k: int
    x: np.ndarray
    y: object
    F_value: float
    gap_primal: float
    gap_dual: float
    decrease_residual: float
    inner_residual: float
    step_norm: float
    wall_time_ns: int = 0
    x_next: Optional[np.ndarray] = None
    F_next: Optional[float] = None
    w: Optional[np.ndarray] = None
    F_w: Optional[float] = None
    solver_used: str = ""


@dataclass(frozen=True)
class Trace:
    records: tuple
    config_digest: str
    terminated_by: str
    final_x: Optional[np.ndarray] = None
    final_F: Optional[float] = None
    message: str = ""

    def __len__(self):
        return len(self.records)

    def iterates(self):
        """All iterates ``x^0, …, x^K`` including the final one."""
        xs = [r.x for r in self.records]
        if self.final_x is not None:
            xs.append(self.final_x)
        return np.array(xs)

    def F_values(self):
        """Objective values along the iterates, including the final one."""
        Fs = [r.F_value for r in self.records]
        if self.final_F is not None:
            Fs.append(self.final_F)
        return np.array(Fs, dtype=float)

    def gap_sums(self):
        return np.array([r.gap_primal + r.gap_dual for r in self.records], dtype=float)
