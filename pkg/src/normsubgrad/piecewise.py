"""Dual solver for sums of clipped quadratics.

Objectives of the form

    f(y) = (1/n) sum_i max_{t in [lo_i, hi_i]} t * phi_i(y) + (ridge/2) ||y||^2,
    phi_i(y) = const_i + <lin_i, y> + y^T Q_i y,

cover |residual| losses ([lo, hi] = [-1, 1]), hinge losses ([0, 1]) and the
quadratic residuals of matrix sensing. For a prox centre x and lam > 0 the
subproblem h(y) = f(y) + ||y - x||^2 / (2 lam) equals max_t Q_t(y) with Q_t
quadratic in y. Whenever every Q_t is strongly convex the minimax theorem
gives h* = max_t min_y Q_t(y), so any feasible t yields a rigorous lower
bound and the primal/dual gap is a certificate of inner accuracy.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
from scipy.optimize import minimize

from .core import ContractError


@dataclass(frozen=True)
class DualSolution:
    point: np.ndarray
    primal_value: float
    dual_value: float
    multipliers: np.ndarray
    iterations: int

    @property
    def gap(self) -> float:
        return max(self.primal_value - self.dual_value, 0.0)


class PiecewiseQuadratic:
    def __init__(self, const, lin, t_lower, t_upper, quad=None, ridge: float = 0.0):
        self.const = np.asarray(const, dtype=np.float64)
        self.lin = np.atleast_2d(np.asarray(lin, dtype=np.float64))
        self.n, self.dim = self.lin.shape
        self.quad = None if quad is None else np.asarray(quad, dtype=np.float64)
        self.t_lower = np.broadcast_to(np.asarray(t_lower, dtype=np.float64), (self.n,))
        self.t_upper = np.broadcast_to(np.asarray(t_upper, dtype=np.float64), (self.n,))
        self.ridge = float(ridge)
        if self.quad is not None and self.quad.shape != (self.n, self.dim, self.dim):
            raise ContractError("quad must have shape (n, dim, dim)")

    def residuals(self, y: np.ndarray) -> np.ndarray:
        r = self.const + self.lin @ y
        if self.quad is not None:
            r = r + np.einsum("ipq,p,q->i", self.quad, y, y)
        return r

    def value(self, y: np.ndarray) -> float:
        r = self.residuals(y)
        pieces = np.maximum(self.t_lower * r, self.t_upper * r)
        return float(pieces.mean() + 0.5 * self.ridge * y @ y)

    def curvature_bound(self) -> float:
        """Largest ||(2/n) sum_i t_i Q_i|| over the multiplier box (upper bound)."""
        if self.quad is None:
            return 0.0
        norms = np.linalg.norm(self.quad, ord=2, axis=(1, 2))
        tmax = np.maximum(np.abs(self.t_lower), np.abs(self.t_upper))
        return float(2.0 * np.mean(tmax * norms))

    def _inner(self, t, center, inv_lam):
        m = self._matrix(t, inv_lam)
        rhs = -(self.lin.T @ t) / self.n
        if center is not None:
            rhs = rhs + inv_lam * center
        y = np.linalg.solve(m, rhs)
        r = self.residuals(y)
        val = (t @ r) / self.n + 0.5 * self.ridge * y @ y
        if center is not None:
            diff = y - center
            val += 0.5 * inv_lam * diff @ diff
        return y, val, r

    def _matrix(self, t, inv_lam):
        m = (self.ridge + inv_lam) * np.eye(self.dim)
        if self.quad is not None:
            m = m + (2.0 / self.n) * np.tensordot(t, self.quad, axes=1)
        return m

    def _polish(self, t, center, inv_lam, rounds: int = 30):
        """Active-set Newton on the free multipliers: drive phi_free(y(t)) to 0."""
        lo, hi = self.t_lower, self.t_upper
        for _ in range(rounds):
            y, _, r = self._inner(t, center, inv_lam)
            span = hi - lo
            at_lo = (t <= lo + 1e-12 * span) & (r <= 0)
            at_hi = (t >= hi - 1e-12 * span) & (r >= 0)
            free = ~(at_lo | at_hi)
            if not np.any(free):
                return t
            grads = self.lin[free]
            if self.quad is not None:
                grads = grads + 2.0 * self.quad[free] @ y
            m = self._matrix(t, inv_lam)
            jac = grads @ np.linalg.solve(m, grads.T) / self.n
            step = np.linalg.lstsq(jac, r[free], rcond=None)[0]
            t_new = t.copy()
            t_new[free] = np.clip(t[free] + step, lo[free], hi[free])
            if np.array_equal(t_new, t):
                return t
            t = t_new
        return t

    def solve(self, center=None, lam: float | None = None, *, tol: float = 1e-10,
              max_iter: int = 20000, primal=None) -> DualSolution:
        """Minimise f (centre None) or f + ||y - centre||^2/(2 lam).

        ``primal`` evaluates f independently of this structure; the reported
        primal value (and hence the gap) comes from it when given.
        """
        if center is None:
            inv_lam = 0.0
            if self.ridge <= 0.0:
                raise ContractError("unregularised solve needs ridge > 0")
        else:
            if lam is None or lam <= 0.0:
                raise ContractError("prox solve needs lam > 0")
            inv_lam = 1.0 / lam
            center = np.asarray(center, dtype=np.float64)
        if self.ridge + inv_lam <= self.curvature_bound():
            raise ContractError("subproblem is not strongly convex for this lam")
        primal = primal if primal is not None else self.value

        def neg_dual(t):
            _, val, r = self._inner(t, center, inv_lam)
            return -val, -r / self.n

        # warm start from the multipliers selected at the centre
        y0 = center if center is not None else np.zeros(self.dim)
        r0 = self.residuals(y0)
        t0 = np.where(r0 > 0, self.t_upper, np.where(r0 < 0, self.t_lower, 0.0))
        t0 = np.clip(t0, self.t_lower, self.t_upper)
        bounds = list(zip(self.t_lower, self.t_upper))

        best = None
        t = t0
        iters = 0
        for _ in range(4):
            res = minimize(neg_dual, t, jac=True, method="L-BFGS-B", bounds=bounds,
                           options={"maxiter": max_iter, "ftol": 1e-16, "gtol": 1e-14,
                                    "maxcor": 30})
            iters += int(res.nit)
            t = np.clip(res.x, self.t_lower, self.t_upper)
            for cand_t in (t, self._polish(t, center, inv_lam)):
                y, dual, _ = self._inner(cand_t, center, inv_lam)
                h = primal(y)
                if center is not None:
                    diff = y - center
                    h += 0.5 * inv_lam * diff @ diff
                cand = DualSolution(y, float(h), float(dual), cand_t, iters)
                if best is None or cand.gap < best.gap:
                    best = cand
            t = best.multipliers
            if best.gap <= tol * (1.0 + abs(best.primal_value)):
                break
        return best
