"""
Damped least squares (Levenberg-Marquardt) with an inspectable history.

scipy's ``least_squares`` does not report the cost at each accepted step,
which the analysis tests rely on, so the loop is written out here. It is
cross-checked against scipy in the test suite.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Callable, Optional

import numpy as np

__all__ = ["LMResult", "levenberg_marquardt", "numerical_jacobian"]


@dataclass
class LMResult:
    x: np.ndarray
    cost: float
    jac: np.ndarray
    residuals: np.ndarray
    iterations: int
    converged: bool
    message: str
    costs: list = field(default_factory=list)

    def covariance(self, scale: float = 1.0) -> np.ndarray:
        """``scale * inv(J^T J)``; pseudo-inverse if the Hessian is singular."""
        JTJ = self.jac.T @ self.jac
        try:
            cov = np.linalg.inv(JTJ)
        except np.linalg.LinAlgError:
            cov = np.linalg.pinv(JTJ)
        return scale * cov


def numerical_jacobian(fun: Callable, x: np.ndarray, f0: Optional[np.ndarray] = None, rel_step: float = 1e-7) -> np.ndarray:
    """Central-difference Jacobian of a vector function."""
    x = np.asarray(x, dtype=float)
    cols = []
    for i in range(x.size):
        h = rel_step * max(1.0, abs(x[i]))
        xp, xm = x.copy(), x.copy()
        xp[i] += h
        xm[i] -= h
        cols.append((fun(xp) - fun(xm)) / (2.0 * h))
    return np.stack(cols, axis=1)


def levenberg_marquardt(
    fun: Callable,
    x0,
    *,
    jac: Optional[Callable] = None,
    max_iter: int = 200,
    xtol: float = 1e-10,
    ftol: float = 1e-14,
    gtol: float = 1e-12,
    lam0: float = 1e-3,
) -> LMResult:
    """Minimise ``0.5 * sum(fun(x)**2)``.

    Uses Marquardt's diagonal scaling. Converges when the relative step falls
    below ``xtol``, the relative cost decrease below ``ftol``, or the scaled
    gradient below ``gtol``. Costs of accepted steps are recorded in ``costs``
    and never increase.
    """
    x = np.array(x0, dtype=float)
    jac = jac or (lambda p: numerical_jacobian(fun, p))
    r = fun(x)
    if not np.all(np.isfinite(r)):
        raise ValueError("residuals are not finite at the starting point")
    cost = 0.5 * float(r @ r)
    costs = [cost]
    lam = lam0
    J = jac(x)
    message = "maximum iterations reached"
    converged = False
    it = 0
    for it in range(1, max_iter + 1):
        g = J.T @ r
        A = J.T @ J
        d = np.diag(A).copy()
        d[d <= 0] = 1.0
        if np.max(np.abs(g) / np.sqrt(d)) <= gtol * max(1.0, np.sqrt(2 * cost)):
            converged, message = True, "gradient below tolerance"
            break
        accepted = False
        while lam < 1e16:
            try:
                step = np.linalg.solve(A + lam * np.diag(d), -g)
            except np.linalg.LinAlgError:
                lam *= 10.0
                continue
            x_new = x + step
            r_new = fun(x_new)
            if np.all(np.isfinite(r_new)):
                cost_new = 0.5 * float(r_new @ r_new)
                if cost_new <= cost:
                    accepted = True
                    break
            lam *= 10.0
        if not accepted:
            converged, message = True, "no further decrease possible"
            break
        rel_step = np.linalg.norm(step) / (np.linalg.norm(x) + xtol)
        rel_drop = (cost - cost_new) / max(cost, 1e-300)
        x, r, cost = x_new, r_new, cost_new
        costs.append(cost)
        lam = max(lam / 10.0, 1e-12)
        J = jac(x)
        if rel_step < xtol:
            converged, message = True, "relative step below tolerance"
            break
        if rel_drop < ftol:
            converged, message = True, "relative cost decrease below tolerance"
            break
    return LMResult(
        x=x,
        cost=cost,
        jac=J,
        residuals=r,
        iterations=it,
        converged=converged,
        message=message,
        costs=costs,
    )
