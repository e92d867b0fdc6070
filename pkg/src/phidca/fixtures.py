"""Catalog of small test problems ``min g − f``.

Each builder returns a :class:`~phidca.core.Problem` whose ``meta`` dict holds
the default start ``x0`` and constants used by rate checks (``r0`` etc.).
"""

from __future__ import annotations

import itertools

import numpy as np
from scipy.special import xlogy

from .core import GFunction, InvalidArgumentError, Oracle, Problem
from .couplings import Anisotropic, Bilinear, Bregman, Hoelder, L0L1, Quadratic, Tensor
from .references import make_reference


def _scalar(fn):
    """Lift a scalar-vectorized function of ``x[..., 0]`` to shape ``(..., 1)`` inputs."""
    return lambda x: fn(np.asarray(x, dtype=float)[..., 0])


def _problem(name, f, g, coupling, dim, x0, inf_F=None, xstar=None, box=None, **meta):
    lo, hi = box if box is not None else (None, None)
    meta["x0"] = np.atleast_1d(np.asarray(x0, dtype=float))
    return Problem(
        f=f,
        g=g,
        coupling=coupling,
        dim=dim,
        known_inf_F=inf_F,
        known_minimizer=None if xstar is None else np.atleast_1d(np.asarray(xstar, dtype=float)),
        name=name,
        grid_lower=None if lo is None else np.atleast_1d(np.asarray(lo, dtype=float)),
        grid_upper=None if hi is None else np.atleast_1d(np.asarray(hi, dtype=float)),
        meta=meta,
    )


def fig1_maxquad():
    """``f = max{x² − x + 1, −x² − 5x + 7}`` with ``g = 2x²`` and ``Φ = −(x − y)²``."""

    def branches(x):
        return x * x - x + 1.0, -x * x - 5.0 * x + 7.0

    def val(x):
        a, b = branches(x)
        return np.maximum(a, b)

    def grad(x):
        a, b = branches(x[0])
        return np.array([2 * x[0] - 1.0 if a >= b else -2 * x[0] - 5.0])

    def hess(x):
        a, b = branches(x[0])
        return np.array([[2.0 if a >= b else -2.0]])

    f = Oracle(_scalar(val), grad, hess, "maxquad")
    g = GFunction(1, quad=[[4.0]])
    return _problem(
        "fig1-maxquad", f, g, Quadratic(2.0), 1, [2.0],
        inf_F=-109.0 / 12.0, xstar=[-5.0 / 6.0], box=([-3.0], [3.0]), lip=30.0,
    )


def fig2_phi15():
    """``f = −|x|^1.5`` on ``(−1, 1)`` and ``½x² − (5/2)|x| + 1`` outside.

    ``g = ½|x − ½| + δ_[−4,4]`` and ``Φ = −(3/2)|(x − y)/2|^1.5``, the anisotropic
    coupling with ``h = (3/4)|·|^1.5`` and ``L = 1/2``.
    """

    def val(x):
        a = np.abs(x)
        return np.where(a < 1, -a**1.5, 0.5 * x * x - 2.5 * a + 1.0)

    def grad(x):
        t = x[0]
        a = abs(t)
        if a < 1:
            return np.array([-1.5 * np.sign(t) * np.sqrt(a)])
        return np.array([t - 2.5 * np.sign(t)])

    def hess(x):
        a = abs(x[0])
        if a < 1:
            return np.array([[-0.75 / np.sqrt(a) if a > 0 else -np.inf]])
        return np.array([[1.0]])

    f = Oracle(_scalar(val), grad, hess, "fig2")
    g = GFunction(1, l1_weight=[0.5], l1_center=[0.5], lower=[-4.0], upper=[4.0])
    h = make_reference("power", q=1.5, c=0.75)
    return _problem(
        "fig2-phi15", f, g, Anisotropic(h, 0.5), 1, [2.0],
        inf_F=25.0 / 108.0, xstar=[1.0 / 9.0], box=([-4.0], [4.0]), lip=10.0,
    )


def quad_1d():
    """``f = 0``, ``g = ½x²``, quadratic coupling ``L = 1``."""
    f = Oracle(_scalar(lambda x: np.zeros_like(x)), lambda x: np.zeros(1), lambda x: np.zeros((1, 1)), "zero")
    g = GFunction(1, quad=[[1.0]])
    return _problem("quad-1d", f, g, Quadratic(1.0), 1, [1.0], inf_F=0.0, xstar=[0.0],
                    box=([-2.0], [2.0]), lip=4.0, convex=True)


def pl_quad(mu=0.5, L=1.0):
    """``f = −(μ/2)x²``, ``g = 0``; satisfies the PL inequality with constant ``μ``."""
    mu = float(mu)
    if not 0 < mu <= L:
        raise InvalidArgumentError("pl-quad needs 0 < mu <= L")
    f = Oracle(_scalar(lambda x: -0.5 * mu * x * x), lambda x: -mu * x, lambda x: np.array([[-mu]]), "negquad")
    g = GFunction(1)
    return _problem("pl-quad", f, g, Quadratic(L), 1, [1.0], inf_F=0.0, xstar=[0.0],
                    box=([-2.0], [2.0]), lip=4.0, mu=mu, convex=True)


LASSO_A = np.array([[2.0, 1.0], [1.0, 3.0], [0.0, 1.0]])
LASSO_B = np.array([1.0, 2.0, 3.0])


def _lasso_solution(A, b, lam):
    """Exact lasso minimizer by enumerating sign patterns."""
    Q = A.T @ A
    best = None
    n = A.shape[1]
    for s in itertools.product((-1.0, 0.0, 1.0), repeat=n):
        s = np.array(s)
        sup = s != 0
        x = np.zeros(n)
        if sup.any():
            x[sup] = np.linalg.solve(Q[np.ix_(sup, sup)], (A.T @ b - lam * s)[sup])
            if np.any(np.sign(x[sup]) != s[sup]):
                continue
        r = Q @ x - A.T @ b
        if np.any(np.abs(r[~sup]) > lam + 1e-12):
            continue
        F = 0.5 * np.sum((A @ x - b) ** 2) + lam * np.sum(np.abs(x))
        if best is None or F < best[0]:
            best = (F, x)
    return best


def lasso_2d(lam=3.0):
    """``−f = ½‖Ax − b‖²``, ``g = λ‖x‖₁``; quadratic coupling with ``L = λ_max(AᵀA)``."""
    A, b = LASSO_A, LASSO_B
    Q = A.T @ A
    L = float(np.linalg.eigvalsh(Q)[-1])
    f = Oracle(
        lambda x: -0.5 * np.sum((np.asarray(x) @ A.T - b) ** 2, axis=-1),
        lambda x: -(Q @ x - A.T @ b),
        lambda x: -Q,
        "neg-least-squares",
    )
    g = GFunction(2, l1_weight=[lam, lam])
    F_star, xstar = _lasso_solution(A, b, lam)
    return _problem("lasso-2d", f, g, Quadratic(L), 2, [0.9, 1.2], inf_F=F_star, xstar=xstar,
                    box=([-0.5, -0.4], [1.5, 1.6]), lip=60.0, L=L, lam=lam, convex=True)


LOGISTIC_A = np.array([[1.0, 0.5], [-0.5, 1.0], [0.8, -1.2], [-1.0, -0.3], [0.3, 0.9]])
LOGISTIC_B = np.array([1.0, 1.0, -1.0, 1.0, -1.0])


def logistic_2d(rho=0.1):
    """``−f = Σ log(1 + exp(−b_i ⟨a_i, x⟩))``, ``g = (ρ/2)‖x‖²``; ``L = λ_max(AᵀA)/4``."""
    A, b = LOGISTIC_A, LOGISTIC_B
    M = A * b[:, None]
    rho = float(rho)
    L = float(np.linalg.eigvalsh(A.T @ A)[-1]) / 4.0

    def val(x):
        return -np.sum(np.logaddexp(0.0, -(np.asarray(x) @ M.T)), axis=-1)

    def sig(x):
        return 0.5 * (1.0 + np.tanh(-0.5 * (M @ x)))  # σ(−⟨m_i, x⟩)

    def grad(x):
        return M.T @ sig(x)

    def hess(x):
        s = sig(x)
        return -(M.T * (s * (1 - s))) @ M

    f = Oracle(val, grad, hess, "neg-logistic")
    g = GFunction(2, quad=rho * np.eye(2))
    # minimizer of F by Newton's method
    x = np.zeros(2)
    for _ in range(100):
        gr = rho * x - grad(x)
        if np.linalg.norm(gr) < 1e-15:
            break
        x = x - np.linalg.solve(rho * np.eye(2) - hess(x), gr)
    F_star = 0.5 * rho * x @ x - float(val(x))
    return _problem("logistic-2d", f, g, Quadratic(L), 2, [1.0, -1.0],
                    inf_F=F_star if rho > 0 else None, xstar=x if rho > 0 else None,
                    box=([-1.1, -1.1], [1.1, 0.9]), lip=10.0, L=L, rho=rho, convex=True)


def l0l1_exp(L0=1.0, L1=1.0, delta=0.99):
    """``−f = cosh``, which is ``(1, 1)``-smooth; ``g = 0``."""
    f = Oracle(_scalar(lambda x: -np.cosh(x)), lambda x: -np.sinh(x), lambda x: -np.cosh(x).reshape(1, 1), "negcosh")
    return _problem("l0l1-exp", f, GFunction(1), L0L1(L0, L1, delta), 1, [2.0], inf_F=1.0, xstar=[0.0],
                    box=([-3.0], [3.0]), lip=20.0, convex=True)


def rosenbrock_2d():
    """``−f`` is the Rosenbrock function; ``g`` is the indicator of ``[−1.5, 1.5]²``.

    ``L = 3902`` bounds the Hessian norm on the box (Gershgorin).
    """

    def val(x):
        x = np.asarray(x, dtype=float)
        u, v = x[..., 0], x[..., 1]
        return -((1 - u) ** 2 + 100.0 * (v - u * u) ** 2)

    def grad(x):
        u, v = x
        return -np.array([-2 * (1 - u) - 400.0 * u * (v - u * u), 200.0 * (v - u * u)])

    def hess(x):
        u, v = x
        return -np.array([[2 - 400.0 * (v - u * u) + 800.0 * u * u, -400.0 * u], [-400.0 * u, 200.0]])

    f = Oracle(val, grad, hess, "neg-rosenbrock")
    g = GFunction(2, lower=[-1.5, -1.5], upper=[1.5, 1.5])
    return _problem("rosenbrock-2d", f, g, Quadratic(3902.0), 2, [-1.2, 1.0], inf_F=0.0, xstar=[1.0, 1.0],
                    box=([-1.5, -0.5], [0.5, 1.5]), lip=5000.0, L=3902.0)


def entropy_box(a=(0.5, 0.8), c=(1.0, 0.5)):
    """``−f = Σ a_i (x_i log x_i − x_i)``, ``g = ⟨c, x⟩`` on the nonnegative orthant.

    ``f`` is smooth relative to the entropy with ``L = 1`` since ``a_i < 1``.
    """
    a = np.asarray(a, dtype=float)
    c = np.asarray(c, dtype=float)

    def val(x):
        x = np.asarray(x, dtype=float)
        with np.errstate(invalid="ignore"):
            v = -np.sum(a * (xlogy(x, x) - x), axis=-1)
        return np.where(np.all(x >= 0, axis=-1), v, -np.inf)

    f = Oracle(val, lambda x: -a * np.log(x), lambda x: np.diag(-a / x), "neg-entropy")
    g = GFunction(2, lin=c, lower=[0.0, 0.0])
    xstar = np.exp(-c / a)
    return _problem("entropy-box", f, g, Bregman("entropy", 1.0), 2, [2.0, 3.0],
                    inf_F=float(-np.sum(a * xstar)), xstar=xstar,
                    box=([0.0, 0.0], [2.0, 3.0]), lip=20.0, convex=True)


def cosh_aniso(h="softplus", L=1.0):
    """``−f = 2 h(x/2)``, ``g = 0``; anisotropic coupling with reference ``h``."""
    ref = make_reference(h)
    f = Oracle(
        lambda x: -2.0 * ref.value(np.asarray(x, dtype=float) / 2.0),
        lambda x: -ref.grad(np.asarray(x, dtype=float) / 2.0),
        lambda x: -0.5 * ref.hess(np.asarray(x, dtype=float) / 2.0),
        "neg-scaled-ref",
    )
    F_star = float(2.0 * ref.value(np.zeros(1)))
    L_h = ref.smoothness if ref.smoothness is not None else 1.0
    return _problem("cosh-aniso", f, GFunction(1), Anisotropic(ref, L), 1, [1.0], inf_F=F_star, xstar=[0.0],
                    box=([-2.0], [2.0]), lip=4.0, L=float(L), L_h=L_h, convex=True)


def logcosh_tensor(coupling="tensor", L=1.0, nu=1.0):
    """``−f = log cosh``, ``g = 0``; tensor (``p = 2``) or Hölder coupling."""
    t = lambda x: np.tanh(np.asarray(x, dtype=float))
    f = Oracle(
        _scalar(lambda x: -(np.abs(x) + np.log1p(np.exp(-2 * np.abs(x))) - np.log(2.0))),
        lambda x: -t(x),
        lambda x: -(1.0 / np.cosh(x) ** 2).reshape(1, 1),
        "neg-logcosh",
    )
    if coupling == "tensor":
        c = Tensor(2, L)
    elif coupling == "hoelder":
        c = Hoelder(L, nu)
    else:
        raise InvalidArgumentError("logcosh-tensor coupling must be 'tensor' or 'hoelder'")
    return _problem("logcosh-tensor", f, GFunction(1), c, 1, [1.0], inf_F=0.0, xstar=[0.0],
                    box=([-2.0], [2.0]), lip=4.0, L=float(L), convex=True)


def dca_quad():
    """``f = x²``, ``g = 2x²`` with the bilinear coupling (classical DCA)."""
    f = Oracle(_scalar(lambda x: x * x), lambda x: 2.0 * x, lambda x: np.array([[2.0]]), "square")
    g = GFunction(1, quad=[[4.0]])
    return _problem("dca-quad", f, g, Bilinear(), 1, [1.0], inf_F=0.0, xstar=[0.0],
                    box=([-2.0], [2.0]), lip=10.0, convex=True)


CATALOG = {
    "cosh-aniso": cosh_aniso,
    "dca-quad": dca_quad,
    "entropy-box": entropy_box,
    "fig1-maxquad": fig1_maxquad,
    "fig2-phi15": fig2_phi15,
    "l0l1-exp": l0l1_exp,
    "lasso-2d": lasso_2d,
    "logcosh-tensor": logcosh_tensor,
    "logistic-2d": logistic_2d,
    "pl-quad": pl_quad,
    "quad-1d": quad_1d,
    "rosenbrock-2d": rosenbrock_2d,
}


def fixture_names():
    return sorted(CATALOG)


def get_fixture(name, **params):
    """Build a catalog problem.

    Examples
    --------
    >>> get_fixture("pl-quad", mu=0.5).meta["mu"]
    0.5
    """
    try:
        builder = CATALOG[name]
    except KeyError:
        raise InvalidArgumentError(f"unknown fixture {name!r}") from None
    try:
        return builder(**params)
    except TypeError as exc:
        raise InvalidArgumentError(f"bad parameters for fixture {name!r}: {exc}") from None
