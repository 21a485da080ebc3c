"""Approximate negative log selection probabilities and their gradients.

Two surrogates for -log P(Y in K), Y ~ N(mu, sigma2_eff I):

* Chernoff: h(mu) = ||mu - proj_K(mu)||^2 / (2 sigma2_eff); exp(-h) upper
  bounds the exact probability. The projection is computed by ADMM.
* Barrier: h(mu) = min_z ||mu - z||^2 / (2 sigma2_eff) + w(z) with
  w(z) = sum_i log(1 + sigma_eff / (b_i - a_i^T z)) finite only on the strict
  interior. Solved by damped Newton in the row space of A.

Both satisfy the envelope identity grad_mu = (mu - z_star) / sigma2_eff,
which is what samplers and solvers consume.
"""

import weakref
from dataclasses import dataclass

import numpy as np
import scipy.linalg

from .errors import (ContractViolationError, ConvergenceError,
                     InfeasibleStartError)
from .model import Polytope, polytope_slack

ADMM_RHO = 1.0
ADMM_TOL = 1e-10
ADMM_MAX_ITER = 10000
NEWTON_TOL = 1e-8
NEWTON_MAX_ITER = 200
ARMIJO = 1e-4
SHRINK = 0.5


@dataclass(frozen=True, eq=False)
class AdjustmentResult:
    """h >= 0 on the negative-log-probability scale, the inner optimizer
    z_star, and the mean gradient grad_mu = (mu - z_star)/sigma2_eff."""

    h: float
    z_star: np.ndarray
    grad_mu: np.ndarray
    method: str
    iterations: int
    converged: bool


# ---------------------------------------------------------------------------
# ADMM projection onto {z : A z <= b}

class _AdmmFactorization:
    def __init__(self, P, rho):
        # unit-norm rows leave the feasible set unchanged and keep one
        # badly scaled constraint from stalling the whole iteration
        scale = np.linalg.norm(P.A, axis=1)
        scale = np.where(scale > 0.0, scale, 1.0)
        self.An = P.A / scale[:, None]
        self.bn = P.b / scale
        self.rho = rho
        self.At = self.An.T
        self.cho = scipy.linalg.cho_factor(
            np.eye(P.d) + rho * (self.At @ self.An))


_admm_cache = weakref.WeakKeyDictionary()


def _admm_factorization(P, rho):
    per_poly = _admm_cache.setdefault(P, {})
    if rho not in per_poly:
        per_poly[rho] = _AdmmFactorization(P, rho)
    return per_poly[rho]


def admm_project(mu, P, rho=ADMM_RHO, tol=ADMM_TOL):
    """Euclidean projection of mu onto the polytope by ADMM.

    Iterates the three updates (on unit-norm constraint rows)
        z <- (I + rho A^T A)^{-1} (mu + rho A^T (b + r - u))
        r <- min(A z - b + u, 0)
        u <- u + (A z - b - r)
    until the primal and dual residual norms drop below tol, doubling or
    halving rho whenever the two residuals drift an order of magnitude
    apart (the scaled dual u is rescaled to match).
    """
    mu = np.asarray(mu, dtype=float).reshape(-1)
    if mu.shape[0] != P.d:
        raise ContractViolationError("mu dimension does not match polytope")
    if rho <= 0:
        raise ContractViolationError("rho must be positive")
    if P.m == 0 or P.contains(mu):
        return mu.copy()
    fac = _admm_factorization(P, rho)
    A, b = fac.An, fac.bn
    m = P.m
    r = np.zeros(m)
    u = np.zeros(m)
    for it in range(ADMM_MAX_ITER):
        z = scipy.linalg.cho_solve(fac.cho, mu + rho * (fac.At @ (b + r - u)))
        Az_b = A @ z - b
        r_new = np.minimum(Az_b + u, 0.0)
        primal = Az_b - r_new
        dual = rho * (fac.At @ (r_new - r))
        u += primal
        r = r_new
        pnorm = float(np.linalg.norm(primal))
        dnorm = float(np.linalg.norm(dual))
        if pnorm < tol and dnorm < tol:
            break
        if (it + 1) % 25 == 0:
            if pnorm > 10.0 * dnorm and rho < 1e6:
                rho *= 2.0
                u *= 0.5
                fac = _admm_factorization(P, rho)
            elif dnorm > 10.0 * pnorm and rho > 1e-6:
                rho *= 0.5
                u *= 2.0
                fac = _admm_factorization(P, rho)
    else:
        raise ConvergenceError(
            "ADMM projection exceeded {} iterations (primal {:.2e}, dual {:.2e})"
            .format(ADMM_MAX_ITER, pnorm, dnorm))
    if np.max(A @ z - b) > tol * max(1.0, float(np.max(np.abs(b))) if m else 1.0):
        raise ConvergenceError("ADMM output violates the constraints beyond tol")
    return z


def chernoff_adjustment(mu, P, sigma2_eff):
    """Chernoff exponent: squared projection distance over 2 sigma2_eff."""
    mu = np.asarray(mu, dtype=float).reshape(-1)
    if sigma2_eff <= 0:
        raise ContractViolationError("sigma2_eff must be positive")
    if P.m == 0 or P.contains(mu):
        return AdjustmentResult(h=0.0, z_star=mu.copy(),
                                grad_mu=np.zeros_like(mu),
                                method="chernoff", iterations=0, converged=True)
    z = admm_project(mu, P)
    diff = mu - z
    return AdjustmentResult(h=float(diff @ diff) / (2.0 * sigma2_eff),
                            z_star=z, grad_mu=diff / sigma2_eff,
                            method="chernoff", iterations=ADMM_MAX_ITER,
                            converged=True)


# ---------------------------------------------------------------------------
# Barrier surrogate

def barrier_value(z, P, sigma_eff):
    """sum_i log(1 + sigma_eff/slack_i) on the strict interior, +inf outside."""
    if P.m == 0:
        return 0.0
    s = polytope_slack(P, z)
    if np.any(s <= 0.0):
        return np.inf
    return float(np.sum(np.log1p(sigma_eff / s)))


class BarrierGeometry:
    """Row-space reduction of the barrier inner problem for one polytope.

    The inner variable is w with z = mu + Q w, Q an orthonormal basis of
    rowspace(A^T); slacks are (b - A mu) - G w with G = A Q. The reduced
    gradient norm equals the full-space gradient norm, so stationarity
    tolerances transfer unchanged.
    """

    def __init__(self, P):
        self.P = P
        A = P.A
        if P.m == 0:
            self.rank = 0
            self.Q = np.zeros((P.d, 0))
            self.G = np.zeros((0, 0))
            return
        U, S, Vt = np.linalg.svd(A, full_matrices=False)
        cutoff = max(A.shape) * np.finfo(float).eps * (S[0] if S.size else 0.0)
        r = int(np.sum(S > cutoff))
        self.rank = r
        self.Q = Vt[:r].T
        self.G = A @ self.Q

    def newton(self, s0, w0, sigma, tol=NEWTON_TOL, max_iter=NEWTON_MAX_ITER):
        """Minimize ||w||^2/(2 sigma^2) + sum log(1 + sigma/(s0 - G w)_i).

        w0 must keep all slacks strictly positive. Returns
        (w, slacks, value, grad_norm, iterations).
        """
        sig2 = sigma * sigma
        G = self.G
        if self.rank == 0:
            return np.zeros(0), s0.copy(), 0.0, 0.0, 0
        w = np.asarray(w0, dtype=float).copy()
        t = s0 - G @ w
        if np.any(t <= 0.0):
            raise InfeasibleStartError("barrier start is not strictly interior")
        f = 0.5 * float(w @ w) / sig2 + float(np.sum(np.log1p(sigma / t)))
        for it in range(max_iter):
            c = sigma / (t * (t + sigma))
            g = w / sig2 + G.T @ c
            gnorm = float(np.linalg.norm(g))
            if gnorm < tol:
                return w, t, f, gnorm, it
            rho = sigma * (2.0 * t + sigma) / (t * t * (t + sigma) ** 2)
            H = (G.T * rho) @ G
            H[np.diag_indices_from(H)] += 1.0 / sig2
            try:
                dw = -np.linalg.solve(H, g)
            except np.linalg.LinAlgError:
                dw = -sig2 * g
            gd = float(g @ dw)
            if gd >= 0.0:
                dw = -sig2 * g
                gd = float(g @ dw)
            if f + ARMIJO * gd == f:
                # the predicted decrease is below the fp resolution of f, so
                # value comparisons are rounding noise; accept on gradient
                # halving instead, which Newton contracts quadratically
                alpha = 1.0
                accepted = False
                for _ in range(80):
                    w_try = w + alpha * dw
                    t_try = s0 - G @ w_try
                    if np.all(t_try > 0.0):
                        g_try = (w_try / sig2
                                 + G.T @ (sigma / (t_try * (t_try + sigma))))
                        if float(np.linalg.norm(g_try)) <= 0.5 * gnorm:
                            w, t = w_try, t_try
                            f = (0.5 * float(w_try @ w_try) / sig2
                                 + float(np.sum(np.log1p(sigma / t_try))))
                            accepted = True
                            break
                    alpha *= SHRINK
                if not accepted:
                    break
                continue
            alpha = 1.0
            accepted = False
            for _ in range(80):
                w_try = w + alpha * dw
                t_try = s0 - G @ w_try
                if np.all(t_try > 0.0):
                    f_try = (0.5 * float(w_try @ w_try) / sig2
                             + float(np.sum(np.log1p(sigma / t_try))))
                    if f_try <= f + ARMIJO * alpha * gd:
                        w, t, f = w_try, t_try, f_try
                        accepted = True
                        break
                alpha *= SHRINK
            if not accepted:
                # gradient direction as a last resort before giving up
                dw = -sig2 * g
                alpha = 1.0
                for _ in range(80):
                    w_try = w + alpha * dw
                    t_try = s0 - G @ w_try
                    if np.all(t_try > 0.0):
                        f_try = (0.5 * float(w_try @ w_try) / sig2
                                 + float(np.sum(np.log1p(sigma / t_try))))
                        if f_try < f:
                            w, t, f = w_try, t_try, f_try
                            accepted = True
                            break
                    alpha *= SHRINK
                if not accepted:
                    break
        c = sigma / (t * (t + sigma))
        g = w / sig2 + G.T @ c
        gnorm = float(np.linalg.norm(g))
        if gnorm >= tol:
            raise ConvergenceError(
                f"barrier Newton stalled at gradient norm {gnorm:.3e}")
        return w, t, f, gnorm, max_iter


_geometry_cache = weakref.WeakKeyDictionary()


def barrier_geometry(P):
    geo = _geometry_cache.get(P)
    if geo is None:
        geo = BarrierGeometry(P)
        _geometry_cache[P] = geo
    return geo


def barrier_adjustment(mu, P, sigma2_eff, init, tol=NEWTON_TOL):
    """Barrier-softened adjustment at mean mu and variance sigma2_eff.

    init must be strictly interior to P (under nonrandomized selection the
    observed response qualifies). The returned z_star is strictly interior
    and grad_mu obeys the envelope identity.
    """
    mu = np.asarray(mu, dtype=float).reshape(-1)
    if sigma2_eff <= 0:
        raise ContractViolationError("sigma2_eff must be positive")
    if mu.shape[0] != P.d:
        raise ContractViolationError("mu dimension does not match polytope")
    if P.m == 0:
        return AdjustmentResult(h=0.0, z_star=mu.copy(),
                                grad_mu=np.zeros_like(mu),
                                method="barrier", iterations=0, converged=True)
    init = np.asarray(init, dtype=float).reshape(-1)
    if np.any(polytope_slack(P, init) <= 0.0):
        raise InfeasibleStartError("init is not strictly interior to the polytope")
    geo = barrier_geometry(P)
    sigma = float(np.sqrt(sigma2_eff))
    s0 = P.b - P.A @ mu
    w0 = geo.Q.T @ (init - mu)
    w, t, f, gnorm, iters = geo.newton(s0, w0, sigma, tol=tol)
    z_star = mu + geo.Q @ w
    return AdjustmentResult(h=float(f), z_star=z_star,
                            grad_mu=-(geo.Q @ w) / sigma2_eff,
                            method="barrier", iterations=iters, converged=True)


def find_interior(P, slack_floor=1e-9):
    """Strictly interior point via a max-slack linear program.

    Returns None when the interior is (numerically) empty. Used by grid
    constructions whose offsets move with the grid parameter.
    """
    from scipy.optimize import linprog

    if P.m == 0:
        return np.zeros(P.d)
    c = np.zeros(P.d + 1)
    c[-1] = -1.0
    A_ub = np.hstack([P.A, np.ones((P.m, 1))])
    res = linprog(c, A_ub=A_ub, b_ub=P.b,
                  bounds=[(None, None)] * P.d + [(None, 1.0)],
                  method="highs")
    if not res.success or res.x is None:
        return None
    z, delta = res.x[:-1], res.x[-1]
    if delta <= slack_floor:
        return None
    return z
