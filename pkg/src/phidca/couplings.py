"""Coupling functions ``Φ(x, y)`` and their x-derivatives.

``phi`` is vectorized in ``x`` (shape ``(..., n)``) for a fixed dual point ``y``;
``grad_x`` and ``hess_x`` act on a single point.
"""

from __future__ import annotations

import numpy as np

from .core import DomainError, DualPair, DualTriple, InvalidArgumentError
from .references import L0L1Reference, Reference, SquaredNorm, make_reference


def _positive(name, value):
    value = float(value)
    if not value > 0 or not np.isfinite(value):
        raise InvalidArgumentError(f"{name} must be a positive real, got {value}")
    return value


def _norm(d):
    return np.linalg.norm(d, axis=-1)


class Coupling:
    """Base coupling. ``y_shape`` is one of ``vector``, ``pair`` or ``triple``."""

    kind = "coupling"
    y_shape = "vector"
    separable = True

    def params(self):
        return {}

    def check_y(self, y, dim=None):
        if self.y_shape == "vector":
            if isinstance(y, (DualPair, DualTriple)):
                raise InvalidArgumentError(f"{self.kind} expects a vector dual point")
            y = np.atleast_1d(np.asarray(y, dtype=float))
            if dim is not None and y.shape != (dim,):
                raise InvalidArgumentError("dual point has the wrong dimension")
            return y
        cls = DualPair if self.y_shape == "pair" else DualTriple
        if not isinstance(y, cls):
            raise InvalidArgumentError(f"{self.kind} expects a {self.y_shape} dual point")
        return y

    def __repr__(self):
        args = ", ".join(f"{k}={v!r}" for k, v in self.params().items())
        return f"{self.kind}({args})"

    def __eq__(self, other):
        return isinstance(other, Coupling) and repr(self) == repr(other)

    def __hash__(self):
        return hash(repr(self))


class Bilinear(Coupling):
    """``Φ(x, y) = ⟨x, y⟩`` (classical DCA)."""

    kind = "Bilinear"

    def phi(self, x, y):
        return np.asarray(x, dtype=float) @ y

    def grad_x(self, x, y):
        return np.array(y, dtype=float)

    def hess_x(self, x, y):
        n = len(y)
        return np.zeros((n, n))


class Quadratic(Coupling):
    """``Φ(x, y) = −(L/2)‖x − y‖²`` (proximal gradient)."""

    kind = "Quadratic"

    def __init__(self, L=1.0):
        self.L = _positive("L", L)

    def params(self):
        return {"L": self.L}

    def phi(self, x, y):
        d = np.asarray(x, dtype=float) - y
        return -0.5 * self.L * np.sum(d * d, axis=-1)

    def grad_x(self, x, y):
        return -self.L * (np.asarray(x, dtype=float) - y)

    def hess_x(self, x, y):
        return -self.L * np.eye(len(y))


class Bregman(Coupling):
    """``Φ(x, y) = −L D_h(x, y)`` (Bregman proximal gradient).

    Evaluates to ``−inf`` for ``x`` outside ``dom h``; ``y`` must lie in
    ``int dom h``.
    """

    kind = "Bregman"

    def __init__(self, h="quadratic", L=1.0):
        self.h = h if isinstance(h, Reference) else make_reference(h)
        self.L = _positive("L", L)
        self.separable = self.h.separable

    def params(self):
        return {"h": self.h, "L": self.L}

    def _check(self, y):
        if not np.all(self.h.in_interior(np.asarray(y, dtype=float))):
            raise DomainError("Bregman coupling: y outside int dom h")

    def phi(self, x, y):
        self._check(y)
        x = np.asarray(x, dtype=float)
        hx = self.h.value(x)
        lin = self.h.value(y) + (x - y) @ self.h.grad(y)
        with np.errstate(invalid="ignore"):
            out = -self.L * (hx - lin)
        return np.where(np.isinf(hx), -np.inf, out)

    def grad_x(self, x, y):
        self._check(y)
        return -self.L * (self.h.grad(x) - self.h.grad(y))

    def hess_x(self, x, y):
        return -self.L * self.h.hess(x)


class ReversedBregman(Coupling):
    """``Φ(x, y) = −D_h(y, x)`` (natural gradient)."""

    kind = "ReversedBregman"

    def __init__(self, h="quadratic"):
        self.h = h if isinstance(h, Reference) else make_reference(h)
        self.separable = False

    def params(self):
        return {"h": self.h}

    def phi(self, x, y):
        x = np.asarray(x, dtype=float)
        if not np.all(self.h.in_interior(x)):
            raise DomainError("reversed Bregman coupling: x outside int dom h")
        hy = float(self.h.value(y))
        if x.ndim == 1:
            return -(hy - self.h.value(x) - self.h.grad(x) @ (y - x))
        flat = x.reshape(-1, x.shape[-1])
        vals = np.array([-(hy - self.h.value(p) - self.h.grad(p) @ (y - p)) for p in flat])
        return vals.reshape(x.shape[:-1])

    def grad_x(self, x, y):
        x = np.asarray(x, dtype=float)
        return self.h.hess(x) @ (np.asarray(y, dtype=float) - x)

    def hess_x(self, x, y, step=1e-6):
        # central differences of the analytic gradient
        x = np.asarray(x, dtype=float)
        n = len(x)
        H = np.empty((n, n))
        for i in range(n):
            e = np.zeros(n)
            e[i] = step * max(1.0, abs(x[i]))
            H[:, i] = (self.grad_x(x + e, y) - self.grad_x(x - e, y)) / (2 * e[i])
        return 0.5 * (H + H.T)


class Anisotropic(Coupling):
    """``Φ(x, y) = −((1/L) ⋆ h)(x − y) = −(1/L) h(L(x − y))`` (anisotropic prox-gradient)."""

    kind = "Anisotropic"

    def __init__(self, h="quadratic", L=1.0):
        self.h = h if isinstance(h, Reference) else make_reference(h)
        self.L = _positive("L", L)
        self.separable = self.h.separable

    def params(self):
        return {"h": self.h, "L": self.L}

    def phi(self, x, y):
        u = self.L * (np.asarray(x, dtype=float) - y)
        return -self.h.value(u) / self.L

    def grad_x(self, x, y):
        u = self.L * (np.asarray(x, dtype=float) - y)
        return -self.h.grad(u)

    def hess_x(self, x, y):
        u = self.L * (np.asarray(x, dtype=float) - y)
        return -self.L * self.h.hess(u)


class L0L1(Coupling):
    """``Φ(x, y) = −(L0/L1) (λ ⋆ h)(x − y)`` with ``λ = δ/L1`` and the l0l1 reference.

    Evaluates to ``−inf`` when ``‖x − y‖ ≥ λ``.
    """

    kind = "L0L1"

    def __init__(self, L0=1.0, L1=1.0, delta=0.99):
        self.L0 = _positive("L0", L0)
        self.L1 = _positive("L1", L1)
        delta = float(delta)
        if not 0 < delta < 1:
            raise InvalidArgumentError("delta must lie in (0, 1)")
        self.delta = delta
        self.h = L0L1Reference()
        self.separable = False

    def params(self):
        return {"L0": self.L0, "L1": self.L1, "delta": self.delta}

    @property
    def lam(self):
        return self.delta / self.L1

    def phi(self, x, y):
        u = (np.asarray(x, dtype=float) - y) / self.lam
        return -(self.L0 / self.L1) * self.lam * np.where(
            self.h.in_domain(u), self.h.value(u), np.inf
        )

    def grad_x(self, x, y):
        u = (np.asarray(x, dtype=float) - y) / self.lam
        return -(self.L0 / self.L1) * self.h.grad(u)

    def hess_x(self, x, y):
        u = (np.asarray(x, dtype=float) - y) / self.lam
        return -(self.L0 / self.L1) / self.lam * self.h.hess(u)


class Hoelder(Coupling):
    """``Φ(x, (y1, y2)) = ⟨x − y1, y2⟩ − H/(ν+1) ‖x − y1‖^{ν+1}``."""

    kind = "Hoelder"
    y_shape = "pair"
    separable = False

    def __init__(self, H=1.0, nu=1.0):
        self.H = _positive("H", H)
        nu = float(nu)
        if not 0 < nu <= 1:
            raise InvalidArgumentError("nu must lie in (0, 1]")
        self.nu = nu

    def params(self):
        return {"H": self.H, "nu": self.nu}

    def phi(self, x, y):
        d = np.asarray(x, dtype=float) - y.base
        return d @ y.grad - self.H / (self.nu + 1) * _norm(d) ** (self.nu + 1)

    def grad_x(self, x, y):
        d = np.asarray(x, dtype=float) - y.base
        r = np.linalg.norm(d)
        if r == 0:
            return np.array(y.grad, dtype=float)
        return y.grad - self.H * r ** (self.nu - 1) * d

    def hess_x(self, x, y):
        d = np.asarray(x, dtype=float) - y.base
        n = len(d)
        r = np.linalg.norm(d)
        if r == 0:
            if self.nu == 1:
                return -self.H * np.eye(n)
            raise DomainError("Hoelder coupling Hessian is singular at the base point")
        return -self.H * (
            r ** (self.nu - 1) * np.eye(n) + (self.nu - 1) * r ** (self.nu - 3) * np.outer(d, d)
        )


class Tensor(Coupling):
    """Taylor-model coupling of order ``p ∈ {1, 2}``.

    ``p = 1``: ``⟨Y2, d⟩ − (L_p/2)‖d‖²`` with ``y = (y1, Y2)``.
    ``p = 2``: ``⟨Y2, d⟩ + ½⟨d, Y3 d⟩ − (L_p/6)‖d‖³`` with ``y = (y1, Y2, Y3)``.
    """

    kind = "Tensor"
    separable = False

    def __init__(self, p=2, L_p=1.0):
        if p not in (1, 2):
            raise InvalidArgumentError("tensor coupling supports p in {1, 2}")
        self.p = int(p)
        self.L_p = _positive("L_p", L_p)
        self.y_shape = "pair" if self.p == 1 else "triple"

    def params(self):
        return {"p": self.p, "L_p": self.L_p}

    def phi(self, x, y):
        d = np.asarray(x, dtype=float) - y.base
        out = d @ y.grad
        if self.p == 1:
            return out - 0.5 * self.L_p * np.sum(d * d, axis=-1)
        out = out + 0.5 * np.einsum("...i,ij,...j->...", d, y.hess, d)
        return out - self.L_p / 6.0 * _norm(d) ** 3

    def grad_x(self, x, y):
        d = np.asarray(x, dtype=float) - y.base
        if self.p == 1:
            return y.grad - self.L_p * d
        return y.grad + y.hess @ d - 0.5 * self.L_p * np.linalg.norm(d) * d

    def hess_x(self, x, y):
        d = np.asarray(x, dtype=float) - y.base
        n = len(d)
        if self.p == 1:
            return -self.L_p * np.eye(n)
        r = np.linalg.norm(d)
        extra = np.outer(d, d) / r if r > 0 else np.zeros((n, n))
        return y.hess - 0.5 * self.L_p * (r * np.eye(n) + extra)


_KINDS = {
    "Bilinear": Bilinear,
    "Quadratic": Quadratic,
    "Bregman": Bregman,
    "ReversedBregman": ReversedBregman,
    "Anisotropic": Anisotropic,
    "L0L1": L0L1,
    "Hoelder": Hoelder,
    "Tensor": Tensor,
}


def coupling_kinds():
    return sorted(_KINDS)


def make_coupling(kind, **params):
    """Build a coupling from its kind name and keyword parameters.

    A reference function may be given as a name or as ``{"name": ..., **params}``.
    """
    try:
        cls = _KINDS[kind]
    except KeyError:
        raise InvalidArgumentError(f"unknown coupling kind {kind!r}") from None
    h = params.get("h")
    if isinstance(h, dict):
        h = dict(h)
        params["h"] = make_reference(h.pop("name"), **h)
    try:
        return cls(**params)
    except TypeError as exc:
        raise InvalidArgumentError(f"bad parameters for {kind}: {exc}") from None


def phi_eval(coupling, x, y):
    """Evaluate ``Φ(x, y)`` at a single point.

    Examples
    --------
    >>> phi_eval(Quadratic(L=2.0), [1.0], [0.0])
    -1.0
    """
    x = np.atleast_1d(np.asarray(x, dtype=float))
    y = coupling.check_y(y, len(x))
    return float(coupling.phi(x, y))


def phi_grad_x(coupling, x, y):
    """Gradient of ``Φ(·, y)`` at ``x``."""
    x = np.atleast_1d(np.asarray(x, dtype=float))
    y = coupling.check_y(y, len(x))
    return np.asarray(coupling.grad_x(x, y), dtype=float)


def is_quadratic_reference(h):
    return isinstance(h, SquaredNorm)
