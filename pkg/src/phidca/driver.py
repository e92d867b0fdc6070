"""The Φ-DCA loop, its averaged variant and exact gap telemetry."""

from __future__ import annotations

import time
from dataclasses import dataclass
from typing import Optional, Sequence

import numpy as np

from .backward import backward_step
from .core import (
    INF,
    DomainError,
    InvalidArgumentError,
    IterationRecord,
    NumericalError,
    Trace,
    UnboundedSubproblemError,
    as_point,
    eval_F,
    ext_sub,
)
from .forward import averaging_weight, forward_step

_SOLVER_ERRORS = (DomainError, NumericalError, UnboundedSubproblemError)


@dataclass(frozen=True)
class SolverOptions:
    """Stopping rule and inner accuracy of a run.

    Parameters
    ----------
    max_iter : int
    gap_tol : float
        Stop once ``gap_primal + gap_dual ≤ gap_tol``.
    inner_tol : float
        First-order tolerance of numeric backward solves.
    averaging_p : float
        Order ``p`` of the built-in weights ``λ_k = (k/(k+1))^{p+1}``.
    schedule : sequence of float, optional
        Explicit weights ``λ_0, λ_1, …`` overriding the built-in ones.
    record_timing : bool
        Store wall-clock time per iteration (otherwise 0, for reproducible output).
    min_iter : int
        Do not apply the gap stopping rule before this many iterations.
    """

    max_iter: int = 1000
    gap_tol: float = 1e-10
    inner_tol: float = 1e-10
    averaging_p: float = 1.0
    schedule: Optional[Sequence[float]] = None
    record_timing: bool = False
    min_iter: int = 0

    def __post_init__(self):
        if int(self.max_iter) < 1:
            raise InvalidArgumentError("max_iter must be at least 1")
        if not self.gap_tol > 0 or not self.inner_tol > 0:
            raise InvalidArgumentError("tolerances must be positive")
        if not self.averaging_p > 0:
            raise InvalidArgumentError("averaging order p must be positive")

    def weight(self, k):
        if self.schedule is not None:
            if k >= len(self.schedule):
                raise InvalidArgumentError("explicit averaging schedule is too short")
            return float(self.schedule[k])
        return averaging_weight(k, self.averaging_p)


def _f(problem, x):
    return float(problem.f(np.asarray(x, dtype=float)))


def _g(problem, x):
    return float(problem.g(np.asarray(x, dtype=float)))


def _phi(problem, x, y):
    return float(problem.coupling.phi(np.asarray(x, dtype=float), y))


def compute_gaps(problem, x_k, y_k, x_next):
    """Primal and dual gap of one step, exact via the conjugacy identities.

    ``gap_primal = g(x_k) + Φ(x⁺, y) − g(x⁺) − Φ(x_k, y)`` and
    ``gap_dual = f(x⁺) + Φ(x_k, y) − f(x_k) − Φ(x⁺, y)``.

    Examples
    --------
    >>> from phidca.fixtures import get_fixture
    >>> compute_gaps(get_fixture("quad-1d"), [1.0], [1.0], [0.5])
    (0.25, 0.125)
    """
    gk = _g(problem, x_k)
    p_next = _phi(problem, x_next, y_k)
    p_k = _phi(problem, x_k, y_k)
    if gk == INF:
        gp = INF
    else:
        gp = gk + p_next - _g(problem, x_next) - p_k
    gd = _f(problem, x_next) + p_k - _f(problem, x_k) - p_next
    return float(gp), float(gd)


def decrease_residual(F_next, F_k, gap_primal, gap_dual):
    """``F(x⁺) − F(x_k) + gap_primal + gap_dual``; ``+inf`` when ``F(x_k) = +inf``."""
    if not all(np.isfinite([F_next, F_k, gap_primal, gap_dual])):
        return INF
    return float(F_next - F_k + gap_primal + gap_dual)


def phi_bregman_div(problem, x, x_bar):
    """Φ-Bregman divergence ``f(x) − f(x̄) − Φ(x, ȳ) + Φ(x̄, ȳ)`` with ``ȳ = ∇_Φ f(x̄)``.

    Examples
    --------
    >>> from phidca.fixtures import get_fixture
    >>> phi_bregman_div(get_fixture("quad-1d"), [1.0], [0.0])
    0.5
    """
    x = as_point(x, problem.dim)
    x_bar = as_point(x_bar, problem.dim)
    y = forward_step(problem, x_bar)
    return float(_f(problem, x) - _f(problem, x_bar) - _phi(problem, x, y) + _phi(problem, x_bar, y))


def conjugate_g(problem, y, inner_tol=1e-10):
    """``g^Φ(y) = Φ(x⁺, y) − g(x⁺)`` from one backward solve; returns ``(value, x⁺)``."""
    res = backward_step(problem, y, inner_tol)
    return _phi(problem, res.x_plus, y) - _g(problem, res.x_plus), res.x_plus


def dual_objective(problem, y, along=None, grid=None, inner_tol=1e-10):
    """Dual objective ``G(y) = f^Φ(y) − g^Φ(y)``.

    With ``along = x`` and ``y = ∇_Φ f(x)`` the conjugate ``f^Φ(y) = Φ(x, y) − f(x)``
    is exact; otherwise it is taken from a grid (dimension ≤ 2).
    """
    if along is not None:
        x = as_point(along, problem.dim)
        fc = _phi(problem, x, y) - _f(problem, x)
    else:
        from .analysis import Grid, grid_conjugate

        if problem.dim > 2:
            raise InvalidArgumentError("grid conjugate is limited to dimension 2")
        if grid is None:
            grid = Grid(problem.grid_lower, problem.grid_upper, 1e-3)
        fc = grid_conjugate(problem.f, problem.coupling, y, grid)
    gc, _ = conjugate_g(problem, y, inner_tol)
    return float(fc - gc)


def value_function(problem, x, y, inner_tol=1e-10):
    """``V(x, y) = F(x) − gap_primal(x, y)`` via one backward solve."""
    x = as_point(x, problem.dim)
    res = backward_step(problem, y, inner_tol)
    gp, _ = compute_gaps(problem, x, y, res.x_plus)
    return ext_sub(eval_F(problem, x), gp)


def _run(problem, x0, opts, averaged, config_digest):
    x0 = as_point(x0, problem.dim)
    x = x0.copy()
    F = eval_F(problem, x)
    records = []
    terminated = "MaxIter"
    message = ""
    x_next, F_next = x, F
    for k in range(int(opts.max_iter)):
        t0 = time.perf_counter_ns() if opts.record_timing else 0
        try:
            if averaged:
                lam = opts.weight(k)
                if not 0.0 <= lam <= 1.0:
                    raise InvalidArgumentError("averaging weight must lie in [0, 1]")
                if lam == 1.0:
                    w = x.copy()
                elif lam == 0.0:
                    w = x0.copy()
                else:
                    w = lam * x + (1.0 - lam) * x0
                F_w = eval_F(problem, w)
            else:
                w, F_w = x, F
            y = forward_step(problem, w)
            res = backward_step(problem, y, opts.inner_tol)
        except _SOLVER_ERRORS as exc:
            terminated = "DomainError"
            message = f"{type(exc).__name__}: {exc}"
            x_next, F_next = x, F
            break
        x_next = res.x_plus
        F_next = eval_F(problem, x_next)
        gp, gd = compute_gaps(problem, w, y, x_next)
        rec = IterationRecord(
            k=k,
            x=x,
            y=y,
            F_value=F,
            gap_primal=gp,
            gap_dual=gd,
            decrease_residual=decrease_residual(F_next, F_w, gp, gd),
            inner_residual=float(res.inner_residual),
            step_norm=float(np.linalg.norm(x_next - x)),
            wall_time_ns=(time.perf_counter_ns() - t0) if opts.record_timing else 0,
            x_next=x_next,
            F_next=F_next,
            w=w if averaged else None,
            F_w=F_w if averaged else None,
            solver_used=res.solver_used,
        )
        records.append(rec)
        x, F = x_next, F_next
        if gp + gd <= opts.gap_tol and k + 1 >= opts.min_iter:
            terminated = "GapTol"
            break
    return Trace(
        records=tuple(records),
        config_digest=config_digest,
        terminated_by=terminated,
        final_x=x_next,
        final_F=F_next,
        message=message,
    )


def run_phi_dca(problem, x0, opts=None, config_digest=""):
    """Run the plain Φ-DCA iteration from ``x0``.

    Solver errors end the run with ``terminated_by="DomainError"`` and the
    records gathered so far.
    """
    return _run(problem, x0, opts or SolverOptions(), False, config_digest)


def run_phi_dca_averaged(problem, x0, opts=None, config_digest=""):
    """Run the averaged scheme: the forward step is taken at ``w^k = λ_k x^k + (1 − λ_k) x^0``.

    Gaps and the decrease residual of each record refer to the anchor ``w^k``.
    """
    return _run(problem, x0, opts or SolverOptions(), True, config_digest)


def reference_inf_F(problem, x0, opts):
    """``inf F`` for rate checks: the known value, or a long reference run.

    Returns
    -------
    value : float
    estimated : bool
    """
    if problem.known_inf_F is not None:
        return float(problem.known_inf_F), False
    long = SolverOptions(max_iter=10 * int(opts.max_iter), gap_tol=opts.gap_tol, inner_tol=opts.inner_tol)
    tr = run_phi_dca(problem, x0, long)
    return float(np.min(tr.F_values())), True
