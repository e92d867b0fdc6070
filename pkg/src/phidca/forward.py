"""Forward step: the designated continuous selection of the Φ-subdifferential of f."""

from __future__ import annotations

import numpy as np

from .core import DomainError, DualPair, DualTriple, InvalidArgumentError, NumericalError, as_point
from .couplings import (
    Anisotropic,
    Bilinear,
    Bregman,
    Hoelder,
    L0L1,
    Quadratic,
    ReversedBregman,
    Tensor,
)

#: relative threshold below which the reference Hessian counts as singular
SINGULAR_RTOL = 1e-12


def _grad_f(problem, x):
    if problem.f.grad is None:
        raise InvalidArgumentError(f"forward step needs the gradient of f ({problem.name})")
    return np.asarray(problem.f.grad(x), dtype=float).reshape(problem.dim)


def _solve_symmetric(H, v):
    w, V = np.linalg.eigh(0.5 * (H + H.T))
    scale = np.max(np.abs(w))
    if not np.isfinite(scale) or np.min(np.abs(w)) < SINGULAR_RTOL * max(scale, np.finfo(float).tiny):
        raise NumericalError("reference Hessian is singular")
    return V @ ((V.T @ v) / w)


def forward_step(problem, x):
    """Φ-subgradient selection ``y ∈ ∂_Φ f(x)`` for the problem's coupling.

    Parameters
    ----------
    problem : Problem
    x : array_like

    Returns
    -------
    ndarray or DualPair or DualTriple

    Raises
    ------
    DomainError
        For Bregman couplings when ``x`` is outside ``int dom h``.
    NumericalError
        For the natural-gradient coupling when ``∇²h(x)`` is singular.

    Examples
    --------
    >>> from phidca.fixtures import get_fixture
    >>> forward_step(get_fixture("quad-1d"), [1.0])
    array([1.])
    """
    x = as_point(x, problem.dim)
    c = problem.coupling
    if isinstance(c, (Bregman, ReversedBregman)) and not np.all(c.h.in_interior(x)):
        raise DomainError("forward step: x outside int dom h")
    gf = _grad_f(problem, x)
    if isinstance(c, Bilinear):
        return gf
    if isinstance(c, Quadratic):
        return x + gf / c.L
    if isinstance(c, Bregman):
        return c.h.conj_grad(c.h.grad(x) + gf / c.L)
    if isinstance(c, ReversedBregman):
        return x + _solve_symmetric(c.h.hess(x), gf)
    if isinstance(c, Anisotropic):
        return x - c.h.conj_grad(-gf) / c.L
    if isinstance(c, L0L1):
        return x + c.delta / (c.L0 + c.L1 * np.linalg.norm(gf)) * gf
    if isinstance(c, Hoelder):
        return DualPair(x.copy(), gf)
    if isinstance(c, Tensor):
        if c.p == 1:
            return DualPair(x.copy(), gf)
        if problem.f.hess is None:
            raise InvalidArgumentError("tensor p=2 forward step needs the Hessian of f")
        H = np.asarray(problem.f.hess(x), dtype=float).reshape(problem.dim, problem.dim)
        return DualTriple(x.copy(), gf, 0.5 * (H + H.T))
    raise InvalidArgumentError(f"no forward map for coupling {c!r}")


def averaging_weight(k, p):
    """Built-in averaging weight ``λ_k = (k/(k+1))^{p+1}`` (so ``λ_0 = 0``)."""
    return (k / (k + 1.0)) ** (p + 1.0)


def forward_step_averaged(problem, x, x0, lambda_k):
    """Forward step at the anchor ``w = λ x + (1 − λ) x0``.

    Returns
    -------
    w : ndarray
    y : dual point
        ``forward_step(problem, w)``.
    """
    lam = float(lambda_k)
    if not 0.0 <= lam <= 1.0:
        raise InvalidArgumentError("averaging weight must lie in [0, 1]")
    x = as_point(x, problem.dim)
    x0 = as_point(x0, problem.dim)
    if lam == 1.0:
        w = x.copy()
    elif lam == 0.0:
        w = x0.copy()
    else:
        w = lam * x + (1.0 - lam) * x0
    return w, forward_step(problem, w)
