"""Legendre reference functions used by Bregman and anisotropic couplings.

Every reference evaluates on arrays of shape ``(..., n)`` and reduces over the
last axis. Points outside the effective domain evaluate to ``+inf``; the
derivative maps raise :class:`~phidca.core.DomainError` instead.
"""

from __future__ import annotations

import numpy as np

from .core import DomainError


class Reference:
    """Base class for a Legendre function ``h``.

    Subclasses implement the separable scalar pieces (``_val``, ``_der``,
    ``_der2``, ``_conj_der``) or override the vector methods directly.
    """

    name = "reference"
    separable = True
    #: global Lipschitz constant of the gradient, ``None`` if unbounded
    smoothness = None

    def params(self):
        return {}

    def in_domain(self, u):
        return np.ones(np.shape(u)[:-1], dtype=bool)

    def in_interior(self, u):
        return self.in_domain(u)

    def in_conj_domain(self, v):
        return np.ones(np.shape(v)[:-1], dtype=bool)

    def value(self, u):
        u = np.asarray(u, dtype=float)
        ok = self.in_domain(u)
        with np.errstate(all="ignore"):
            val = np.sum(self._val(u), axis=-1)
        return np.where(ok, val, np.inf)

    def grad(self, u):
        u = np.asarray(u, dtype=float)
        if not np.all(self.in_interior(u)):
            raise DomainError(f"{self.name}: gradient requested outside int dom h")
        return self._der(u)

    def hess(self, u):
        u = np.asarray(u, dtype=float)
        if not np.all(self.in_interior(u)):
            raise DomainError(f"{self.name}: Hessian requested outside int dom h")
        return np.diag(self._der2(u))

    def conj_grad(self, v):
        v = np.asarray(v, dtype=float)
        if not np.all(self.in_conj_domain(v)):
            raise DomainError(f"{self.name}: conjugate gradient outside int dom h*")
        return self._conj_der(v)

    def __repr__(self):
        args = ", ".join(f"{k}={v!r}" for k, v in self.params().items())
        return f"{type(self).__name__}({args})"

    def __eq__(self, other):
        return type(self) is type(other) and self.params() == other.params()

    def __hash__(self):
        return hash((type(self).__name__, tuple(sorted(self.params().items()))))


class SquaredNorm(Reference):
    """``h(u) = ½‖u‖²``."""

    name = "quadratic"
    smoothness = 1.0

    def _val(self, u):
        return 0.5 * u * u

    def _der(self, u):
        return u.copy()

    def _der2(self, u):
        return np.ones_like(u)

    def _conj_der(self, v):
        return v.copy()


class Entropy(Reference):
    """Boltzmann-Shannon entropy ``h(u) = Σ u log u − u`` on the nonnegative orthant."""

    name = "entropy"

    def in_domain(self, u):
        return np.all(u >= 0, axis=-1)

    def in_interior(self, u):
        return np.all(u > 0, axis=-1)

    def _val(self, u):
        pos = np.where(u > 0, u, 1.0)
        return np.where(u > 0, u * np.log(pos) - u, 0.0)

    def _der(self, u):
        return np.log(u)

    def _der2(self, u):
        return 1.0 / u

    def _conj_der(self, v):
        return np.exp(v)


class CoshReference(Reference):
    """``h(u) = Σ cosh(u) − 1``."""

    name = "cosh"

    def _val(self, u):
        return np.cosh(u) - 1.0

    def _der(self, u):
        return np.sinh(u)

    def _der2(self, u):
        return np.cosh(u)

    def _conj_der(self, v):
        return np.arcsinh(v)


class Softplus(Reference):
    """``h(u) = Σ 2 ln(1 + e^u) − u``, an even function with ``h'' ≤ 1/2``.

    ``smoothness`` is reported as 1, the constant used in the a-PGM rate bound.
    """

    name = "softplus"
    smoothness = 1.0

    def in_conj_domain(self, v):
        return np.all(np.abs(v) < 1, axis=-1)

    def _val(self, u):
        return 2.0 * np.logaddexp(0.0, u) - u

    def _der(self, u):
        return np.tanh(0.5 * u)

    def _der2(self, u):
        return 0.5 / np.cosh(0.5 * u) ** 2

    def _conj_der(self, v):
        return 2.0 * np.arctanh(v)


class LogCosh(Reference):
    """``h(u) = Σ ln cosh(u)``."""

    name = "logcosh"
    smoothness = 1.0

    def in_conj_domain(self, v):
        return np.all(np.abs(v) < 1, axis=-1)

    def _val(self, u):
        a = np.abs(u)
        return a + np.log1p(np.exp(-2.0 * a)) - np.log(2.0)

    def _der(self, u):
        return np.tanh(u)

    def _der2(self, u):
        return 1.0 / np.cosh(u) ** 2

    def _conj_der(self, v):
        return np.arctanh(v)


class Power(Reference):
    """``h(u) = Σ c |u|^q`` for ``q > 1``.

    The Hessian is singular at zero for ``q < 2``; :meth:`hess` returns ``inf``
    entries there.
    """

    name = "power"

    def __init__(self, q=1.5, c=0.75):
        if q <= 1 or c <= 0:
            raise ValueError("power reference needs q > 1 and c > 0")
        self.q = float(q)
        self.c = float(c)

    def params(self):
        return {"q": self.q, "c": self.c}

    def _val(self, u):
        return self.c * np.abs(u) ** self.q

    def _der(self, u):
        return self.c * self.q * np.sign(u) * np.abs(u) ** (self.q - 1)

    def _der2(self, u):
        with np.errstate(divide="ignore"):
            return self.c * self.q * (self.q - 1) * np.abs(u) ** (self.q - 2)

    def _conj_der(self, v):
        return np.sign(v) * (np.abs(v) / (self.c * self.q)) ** (1.0 / (self.q - 1))


class L0L1Reference(Reference):
    """``h(u) = −‖u‖ − ln(1 − ‖u‖)`` on the open unit ball.

    Generates the anisotropic model behind ``(L0, L1)``-smooth gradient steps.
    """

    name = "l0l1"
    separable = False

    def in_domain(self, u):
        return np.linalg.norm(u, axis=-1) < 1

    def value(self, u):
        u = np.asarray(u, dtype=float)
        r = np.linalg.norm(u, axis=-1)
        ok = r < 1
        with np.errstate(all="ignore"):
            val = -r - np.log1p(-np.where(ok, r, 0.0))
        return np.where(ok, val, np.inf)

    def grad(self, u):
        u = np.asarray(u, dtype=float)
        r = np.linalg.norm(u, axis=-1, keepdims=True)
        if np.any(r >= 1):
            raise DomainError("l0l1: gradient requested outside the unit ball")
        return u / (1.0 - r)

    def hess(self, u):
        u = np.asarray(u, dtype=float)
        r = float(np.linalg.norm(u))
        if r >= 1:
            raise DomainError("l0l1: Hessian requested outside the unit ball")
        n = u.shape[-1]
        out = np.eye(n) / (1.0 - r)
        if r > 0:
            out += np.outer(u, u) / (r * (1.0 - r) ** 2)
        return out

    def conj_grad(self, v):
        v = np.asarray(v, dtype=float)
        return v / (1.0 + np.linalg.norm(v, axis=-1, keepdims=True))


_REFERENCES = {
    "quadratic": SquaredNorm,
    "entropy": Entropy,
    "cosh": CoshReference,
    "softplus": Softplus,
    "logcosh": LogCosh,
    "power": Power,
    "l0l1": L0L1Reference,
}


def make_reference(name, **params):
    """Build a reference function from its catalog name."""
    try:
        cls = _REFERENCES[name]
    except KeyError:
        raise ValueError(f"unknown reference function {name!r}") from None
    return cls(**params)


def reference_names():
    return sorted(_REFERENCES)
