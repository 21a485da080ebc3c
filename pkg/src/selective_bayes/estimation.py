"""Selective point estimation.

All estimators maximize the (approximate) selection-adjusted posterior or
likelihood. The generic route is gradient ascent with backtracking on the
exact envelope gradient; one-dimensional problems are finished by bisection
on the monotone stationarity residual, which is what pushes agreement with
the closed forms below 1e-12. Randomized estimators are solved after
normalizing the noise scale to one (the scale the fixed-point equations are
written in) and unscaled afterwards.
"""

import dataclasses
from dataclasses import dataclass

import numpy as np

from .adjustment import admm_project, barrier_geometry
from .errors import (ContractViolationError, ConvergenceError,
                     InfeasibleStartError, UnsupportedPriorError,
                     WrongRegimeError)
from .model import Polytope, Prior, GenerativeModel, log_prior_and_grad, polytope_slack
from .posterior import PosteriorSpec, _PosteriorEngine, default_init

GRAD_TOL = 1e-8
MAX_ITER = 20000


@dataclass(frozen=True, eq=False)
class EstimateResult:
    beta_hat: np.ndarray
    objective_value: float
    kkt_residual: float
    method: str
    iterations: int


def _chernoff_value_grad(spec, beta):
    # log posterior with the projection (indicator) surrogate in place of
    # the barrier: h = ||mu - proj||^2 / (2 sigma2_eff)
    model = spec.model
    X = model.X_star
    y = spec.data
    mu = X @ beta
    z = admm_project(mu, spec.ctx.polytope)
    diff = mu - z
    var = spec.adjustment_variance
    lp, lp_grad = log_prior_and_grad(spec.prior, beta)
    resid = y - mu
    val = -0.5 * float(resid @ resid) / model.sigma2 \
        + 0.5 * float(diff @ diff) / var + lp
    grad = X.T @ resid / model.sigma2 + X.T @ diff / var + lp_grad
    return val, grad


def _ascent(value_grad, beta0, tol, max_iter=MAX_ITER):
    """Backtracking gradient ascent; returns (beta, value, grad, iters)."""
    beta = np.asarray(beta0, dtype=float).copy()
    val, grad = value_grad(beta)
    alpha = 1.0
    for it in range(max_iter):
        gnorm = float(np.linalg.norm(grad))
        if gnorm < tol:
            return beta, val, grad, it
        accepted = False
        a = alpha
        for _ in range(200):
            cand = beta + a * grad
            if not np.any(cand != beta):
                # step below the fp resolution of beta: a no-op that the
                # value test would happily accept forever
                break
            v_new, g_new = value_grad(cand)
            if np.isfinite(v_new) and v_new >= val + 1e-4 * a * gnorm * gnorm:
                beta, val, grad = cand, v_new, g_new
                alpha = min(a * 2.0, 1e6)
                accepted = True
                break
            a *= 0.5
        if not accepted:
            # value comparisons saturate in fp near the optimum; accept on a
            # relative gradient-norm decrease instead so the iteration keeps
            # contracting toward the tolerance
            a = max(alpha, 1.0)
            for _ in range(200):
                cand = beta + a * grad
                v_new, g_new = value_grad(cand)
                if (np.isfinite(v_new)
                        and float(np.linalg.norm(g_new)) <= 0.999 * gnorm):
                    beta, val, grad = cand, v_new, g_new
                    alpha = a
                    accepted = True
                    break
                a *= 0.5
        if not accepted:
            break
    gnorm = float(np.linalg.norm(grad))
    if gnorm >= tol:
        beta, val, grad = _newton_polish(value_grad, beta, val, grad, tol)
        gnorm = float(np.linalg.norm(grad))
    if gnorm >= tol:
        raise ConvergenceError(
            f"gradient ascent stalled at gradient norm {gnorm:.3e}")
    return beta, val, grad, max_iter


def _newton_polish(value_grad, beta, val, grad, tol, max_iter=40):
    """Damped Newton on the gradient with a finite-difference Jacobian.

    Plain ascent zig-zags once the selected design is badly conditioned;
    this finishes the last few orders of magnitude. Steps are accepted on
    gradient-norm contraction, so value saturation cannot stall it.
    """
    k = beta.shape[0]
    gnorm = float(np.linalg.norm(grad))
    for _ in range(max_iter):
        if gnorm < tol:
            break
        h = 1e-6 * max(1.0, float(np.linalg.norm(beta)))
        J = np.empty((k, k))
        for i in range(k):
            e = np.zeros(k)
            e[i] = h
            _, gp = value_grad(beta + e)
            _, gm = value_grad(beta - e)
            J[:, i] = (gp - gm) / (2.0 * h)
        J = 0.5 * (J + J.T)
        try:
            d = np.linalg.solve(J, -grad)
        except np.linalg.LinAlgError:
            break
        if not np.all(np.isfinite(d)):
            break
        a = 1.0
        accepted = False
        for _ in range(60):
            v_new, g_new = value_grad(beta + a * d)
            gn = float(np.linalg.norm(g_new))
            if np.isfinite(v_new) and gn <= (1.0 - 0.5 * a) * gnorm:
                beta = beta + a * d
                val, grad, gnorm = v_new, g_new, gn
                accepted = True
                break
            a *= 0.5
        if not accepted:
            break
    return beta, val, grad


def _polish_scalar_root(fn, x0, decreasing=True, span0=1e-6):
    """Bisection for the root of a monotone scalar function near x0."""
    sign = -1.0 if decreasing else 1.0

    def g(x):
        return sign * fn(x)  # increasing after flip

    g0 = g(x0)
    span = max(span0, 1e-9 * abs(x0))
    lo = hi = x0
    glo = ghi = g0
    for _ in range(200):
        if glo > 0.0:
            lo = lo - span
            glo = g(lo)
        if ghi < 0.0:
            hi = hi + span
            ghi = g(hi)
        if glo <= 0.0 <= ghi:
            break
        span *= 2.0
    else:
        return x0
    for _ in range(200):
        mid = 0.5 * (lo + hi)
        if hi - lo < 1e-16 * max(1.0, abs(mid)):
            break
        gm = g(mid)
        if gm <= 0.0:
            lo = mid
        else:
            hi = mid
    return 0.5 * (lo + hi)


def map_estimate(spec, adjustment="barrier", tol=GRAD_TOL):
    """Approximate selective MAP by gradient ascent on the adjusted posterior.

    Requires a log-concave prior (flat or gaussian); the mixture prior is
    rejected. The reported kkt_residual is the gradient norm at the output.
    """
    if not spec.prior.log_concave:
        raise UnsupportedPriorError("MAP needs a log-concave prior")
    if adjustment == "barrier":
        engine = _PosteriorEngine(spec)

        def vg(beta):
            # inner solves a couple of orders tighter than the outer test,
            # otherwise envelope-gradient noise keeps the loop spinning; a
            # line-search candidate far from the optimum may bottom the
            # inner Newton out above that, so loosen rather than give up
            for t in (1e-10, 1e-8):
                try:
                    return engine.value_and_grad(beta, tol=t)
                except ConvergenceError:
                    continue
            return engine.value_and_grad(beta, tol=1e-6)
    elif adjustment == "chernoff":
        def vg(beta):
            return _chernoff_value_grad(spec, beta)
    else:
        raise ContractViolationError(f"unknown adjustment {adjustment!r}")

    beta, val, grad, iters = _ascent(vg, default_init(spec), tol)
    if beta.shape[0] == 1 and adjustment == "barrier":
        # finish with bisection on the scalar gradient (strictly decreasing)
        def g1(b):
            try:
                return engine.value_and_grad(np.array([b]), tol=1e-13)[1][0]
            except ConvergenceError:
                return engine.value_and_grad(np.array([b]), tol=1e-11)[1][0]

        beta = np.array([_polish_scalar_root(g1, beta[0], decreasing=True)])
        val, grad = vg(beta)
    return EstimateResult(beta_hat=beta, objective_value=-val,
                          kkt_residual=float(np.linalg.norm(grad)),
                          method="map", iterations=iters)


def mle_saturated_closed_form(y, P, sigma):
    """Closed-form saturated flat-prior MAP: y plus the barrier gradient.

    Each constraint row contributes sigma * a_i / (s_i (s_i + sigma)) with
    slack s_i = b_i - a_i^T y; y must be strictly interior.
    """
    y = np.asarray(y, dtype=float).reshape(-1)
    if P.m == 0:
        return y.copy()
    s = polytope_slack(P, y)
    if np.any(s <= 0.0):
        raise InfeasibleStartError("y is not strictly interior to the event")
    coef = sigma / (s * (s + sigma))
    return y + P.A.T @ coef


def general_mle(spec, adjustment="barrier", tol=GRAD_TOL):
    """Flat-prior selective MLE via the same ascent as map_estimate.

    Certifies the estimating equation X*^T z*(X* beta) = X*^T y: the
    reported kkt_residual is ||X*^T (z* - y)||.
    """
    if spec.prior.kind != "flat":
        raise UnsupportedPriorError("general_mle is defined for the flat prior")
    res = map_estimate(spec, adjustment=adjustment,
                       tol=min(tol, GRAD_TOL) / max(spec.model.sigma2, 1.0))
    # flat prior: posterior gradient is X*^T (y - z*) / sigma^2
    certificate = spec.model.sigma2 * res.kkt_residual
    return EstimateResult(beta_hat=res.beta_hat,
                          objective_value=res.objective_value,
                          kkt_residual=certificate,
                          method="mle", iterations=res.iterations)


def _normalized_randomized(y, spec):
    """Rescale responses, polytope offsets and prior so sigma = 1."""
    sigma = float(np.sqrt(spec.model.sigma2))
    P = spec.ctx.polytope
    P_n = P if sigma == 1.0 else Polytope(P.A, P.b / sigma)
    ctx_n = dataclasses.replace(
        spec.ctx, polytope=P_n, gamma2=spec.ctx.gamma2 / spec.model.sigma2,
        randomization_draw=None if spec.ctx.randomization_draw is None
        else spec.ctx.randomization_draw / sigma)
    model_n = GenerativeModel(X_star=spec.model.X_star, sigma2=1.0,
                              X_E=spec.model.X_E)
    prior = spec.prior
    if prior.kind == "gaussian":
        prior = Prior(kind="gaussian", tau2=prior.tau2 / spec.model.sigma2)
    spec_n = PosteriorSpec(model=model_n, prior=prior, ctx=ctx_n,
                           regime="randomized", data=y / sigma)
    return y / sigma, spec_n, sigma


def _interval_1d(P):
    # interior interval (lo, hi) of a 1-D polytope; infinities allowed
    lo, hi = -np.inf, np.inf
    for a, b in zip(P.A[:, 0], P.b):
        if a > 0:
            hi = min(hi, b / a)
        else:
            lo = max(lo, b / a)
    return lo, hi


def _grad_w_1d(u, P, sigma_bar):
    s = P.b - P.A[:, 0] * u
    return float(np.sum(sigma_bar * P.A[:, 0] / (s * (s + sigma_bar))))


def _randomized_mle_scalar(y, spec_n):
    """Saturated 1-D randomized estimator via the monotone u-equation.

    With sigma = 1 the stationarity reduces to
        u + gamma^2 grad_w(u) = y + grad log pi(beta(u)),
        beta(u) = u + (1 + gamma^2) grad_w(u),
    whose left-minus-right side is strictly increasing in u over the event's
    interior, so an expanding-bracket bisection always finds the unique root
    (even for y far outside the event, where gradient methods crawl).
    """
    P = spec_n.ctx.polytope
    g2 = spec_n.ctx.gamma2
    sbar = float(np.sqrt(1.0 + g2))
    prior = spec_n.prior
    yv = float(np.asarray(y).reshape(-1)[0])

    def beta_of(u):
        return u + (1.0 + g2) * _grad_w_1d(u, P, sbar)

    def rho(u):
        b = beta_of(u)
        if prior.kind == "gaussian":
            drift = -b / prior.tau2
        else:
            drift = 0.0
        return u + g2 * _grad_w_1d(u, P, sbar) - yv - drift

    lo, hi = _interval_1d(P)
    # interior anchor
    if np.isfinite(lo) and np.isfinite(hi):
        u0 = 0.5 * (lo + hi)
    elif np.isfinite(lo):
        u0 = lo + max(1.0, abs(lo) * 0.1)
    elif np.isfinite(hi):
        u0 = hi - max(1.0, abs(hi) * 0.1)
    else:
        u0 = yv
    # expand a bracket inside (lo, hi)
    ulo = uhi = u0
    rlo = rhi = rho(u0)
    step = 1.0
    for _ in range(400):
        if rlo > 0.0:
            ulo = 0.5 * (ulo + lo) if np.isfinite(lo) else ulo - step
            rlo = rho(ulo)
        if rhi < 0.0:
            uhi = 0.5 * (uhi + hi) if np.isfinite(hi) else uhi + step
            rhi = rho(uhi)
        step *= 2.0
        if rlo <= 0.0 <= rhi:
            break
    else:
        raise ConvergenceError("failed to bracket the randomized estimator")
    for _ in range(300):
        mid = 0.5 * (ulo + uhi)
        if uhi - ulo < 1e-16 * max(1.0, abs(mid)):
            break
        if rho(mid) <= 0.0:
            ulo = mid
        else:
            uhi = mid
    u = 0.5 * (ulo + uhi)
    return float(beta_of(u)), u


def randomized_mle(y, spec, tol=GRAD_TOL):
    """Randomized selective MAP/MLE (flat or gaussian prior).

    Solves the estimating equation
        X*^T z*(X* beta) / (1+gamma^2)
            = X*^T y + grad log pi(beta) - gamma^2/(1+gamma^2) X*^T X* beta
    (z* the barrier optimizer at variance 1+gamma^2, noise scale normalized
    to one). Saturated 1-D problems use the monotone scalar reduction;
    everything else runs the concave-objective ascent, whose gradient is
    exactly the equation's residual. kkt_residual certifies the normalized
    equation.
    """
    if spec.ctx.gamma2 <= 0:
        raise WrongRegimeError("randomized_mle needs gamma2 > 0")
    if spec.prior.kind == "mixture":
        raise UnsupportedPriorError("randomized MAP needs a log-concave prior")
    y = np.asarray(y, dtype=float).reshape(-1)
    spec_y = spec if np.array_equal(y, spec.data) else dataclasses.replace(spec, data=y)
    y_n, spec_n, sigma = _normalized_randomized(y, spec_y)

    X = spec_n.model.X_star
    k = X.shape[1]
    engine = _PosteriorEngine(spec_n)
    saturated_1d = (k == 1 and X.shape[0] == 1 and float(X[0, 0]) == 1.0)
    u = None
    if saturated_1d:
        beta_n, u = _randomized_mle_scalar(y_n, spec_n)
        beta_n = np.array([beta_n])
        iters = 0
    else:
        def vg(beta):
            # inner solves tighter than the outer test or its gradient noise
            # masks the true residual; loosen only when a far-out candidate
            # bottoms the inner Newton early
            for t in (1e-10, 1e-8):
                try:
                    return engine.value_and_grad(beta, tol=t)
                except ConvergenceError:
                    continue
            return engine.value_and_grad(beta, tol=1e-6)

        beta_n, _, _, iters = _ascent(vg, default_init(spec_n), tol)
    # certificate on the normalized estimating equation
    g2 = spec_n.ctx.gamma2
    geo = engine.geo
    P_n = spec_n.ctx.polytope
    mu = X @ beta_n
    if P_n.m == 0 or geo.rank == 0:
        z_star = mu.copy()
    else:
        s0 = P_n.b - P_n.A @ mu
        if u is not None:
            w0 = geo.Q.T @ (np.array([u]) - mu)
        else:
            w0 = engine._w
        if w0 is None or np.any(s0 - geo.G @ w0 <= 0.0):
            w0 = engine.feasible_w0(beta_n, s0)
        w, _, _, _, _ = geo.newton(s0, w0, float(np.sqrt(1.0 + g2)), tol=1e-11)
        z_star = mu + geo.Q @ w
    _, lp_grad = log_prior_and_grad(spec_n.prior, beta_n)
    resid = (X.T @ z_star / (1.0 + g2) - X.T @ np.asarray(y_n).reshape(-1)
             - lp_grad + (g2 / (1.0 + g2)) * (X.T @ (X @ beta_n)))
    obj_val, _ = engine.value_and_grad(beta_n)
    return EstimateResult(beta_hat=sigma * beta_n, objective_value=-obj_val,
                          kkt_residual=float(np.linalg.norm(resid)),
                          method="randomized-mle", iterations=iters)
