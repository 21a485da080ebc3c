"""Independent ground-truth layer.

Exact univariate truncated-normal quantities with Mills-ratio stabilization
in the far tail, Monte Carlo estimates of polytope probabilities and
truncated moments, and the exact univariate selective MLE. Nothing here
shares code with the approximation modules it verifies.
"""

from dataclasses import dataclass

import numpy as np
from scipy.special import log_ndtr

from .errors import (ContractViolationError, ConvergenceError,
                     LowAcceptanceError, OutOfEventError)

MILLS_SWITCH = 8.0
LOG_SQRT_2PI = 0.5 * np.log(2.0 * np.pi)


@dataclass(frozen=True, eq=False)
class McEstimate:
    value: float
    std_error: float
    n_samples: int
    n_accepted: int


def _log_phi(a):
    return -0.5 * a * a - LOG_SQRT_2PI


def _mills_log_cdf(a):
    # log Phi(a) for a << 0 via the asymptotic series
    # Phi(a) = phi(a)/|a| * (1 - 1/a^2 + 3/a^4 - 15/a^6 + ...),
    # truncated adaptively at its smallest term. At |a| = 8 the optimal
    # truncation error is ~1e-14, far below the displayed 3-term form.
    a2 = a * a
    term = 1.0
    total = 1.0
    for k in range(1, 200):
        term_next = term * (-(2 * k - 1) / a2)
        if abs(term_next) >= abs(term) or abs(term_next) < 1e-18:
            break
        total += term_next
        term = term_next
    return _log_phi(a) - np.log(-a) + np.log(total)


def exact_univariate_log_survival(mu, sigma, c):
    """log P(Y > c) for Y ~ N(mu, sigma^2), stable arbitrarily far out.

    Uses the error-function based normal CDF for standardized arguments in
    [-8, inf) and the adaptive Mills expansion below -8; the two branches
    agree to ~1e-14 at the switch point.
    """
    if sigma <= 0:
        raise ContractViolationError("sigma must be positive")
    a = (mu - c) / sigma
    if a >= -MILLS_SWITCH:
        return float(log_ndtr(a))
    return float(_mills_log_cdf(a))


def _log_cdf(b):
    # log Phi(b) through the survival primitive
    return exact_univariate_log_survival(0.0, 1.0, -b)


def _hazard(b):
    # phi(b) / Phi(b)
    return float(np.exp(_log_phi(b) - _log_cdf(b)))


def exact_univariate_mle(y):
    """Exact selective MLE for Y ~ N(beta, 1) observed on {Y > 0}.

    Solves y = beta + phi(beta)/Phi(beta) by bisection on [-50, y]; the left
    side is strictly increasing in beta. Residual certified below 1e-10.
    """
    if y <= 0:
        raise OutOfEventError("exact univariate MLE requires y > 0")
    lo, hi = -50.0, float(y)

    def f(b):
        return b + _hazard(b) - y

    flo, fhi = f(lo), f(hi)
    if flo > 0.0 or fhi < 0.0:
        raise ConvergenceError("MLE root not bracketed by [-50, y]")
    for _ in range(200):
        mid = 0.5 * (lo + hi)
        fm = f(mid)
        if fm <= 0.0:
            lo = mid
        else:
            hi = mid
        if hi - lo < 1e-15 * max(1.0, abs(mid)):
            break
    beta = 0.5 * (lo + hi)
    if abs(f(beta)) > 1e-10:
        raise ConvergenceError("MLE bisection residual above 1e-10")
    return beta


def truncated_normal_quantile(mu, sigma, lower, q):
    """Quantile of N(mu, sigma^2) conditioned on exceeding `lower`.

    Works in log-survival space so that even events with probability
    ~exp(-1000) invert cleanly (the experiments draw from exactly such
    laws). q in [0, 1).
    """
    if not 0.0 <= q < 1.0:
        raise ContractViolationError("q must lie in [0, 1)")
    if q == 0.0:
        return float(lower)
    base = exact_univariate_log_survival(mu, sigma, lower)
    target = base + np.log1p(-q)
    hi = max(mu + 10.0 * sigma, lower + sigma)
    while exact_univariate_log_survival(mu, sigma, hi) > target:
        hi = lower + 2.0 * (hi - lower)
    lo = float(lower)
    for _ in range(200):
        mid = 0.5 * (lo + hi)
        if exact_univariate_log_survival(mu, sigma, mid) > target:
            lo = mid
        else:
            hi = mid
        if hi - lo < 1e-13 * max(1.0, abs(mid)):
            break
    return 0.5 * (lo + hi)


def mc_adjustment(mu, P, sigma2_eff, N, rng):
    """Monte Carlo probability that N(mu, sigma2_eff I) lands in P."""
    if N < 1000:
        raise ContractViolationError("mc_adjustment needs N >= 1000")
    mu = np.asarray(mu, dtype=float).reshape(-1)
    if P.m == 0:
        return McEstimate(value=1.0, std_error=0.0, n_samples=N, n_accepted=N)
    draws = mu + np.sqrt(sigma2_eff) * rng.standard_normal((N, mu.shape[0]))
    inside = np.all(draws @ P.A.T <= P.b, axis=1)
    count = int(np.sum(inside))
    p_hat = count / N
    if count == 0:
        se = 3.0 / N
    else:
        se = float(np.sqrt(p_hat * (1.0 - p_hat) / N))
    return McEstimate(value=p_hat, std_error=se, n_samples=N, n_accepted=count)


def mc_truncated_moment(y, P, gamma2, N, rng, batch=200000):
    """Rejection estimate of E(W | y + W in P) with W ~ N(0, gamma2 I).

    Proposes at most 10*N draws; aborts with the observed acceptance rate if
    fewer than 100 make it in.
    """
    y = np.asarray(y, dtype=float).reshape(-1)
    if gamma2 <= 0:
        raise ContractViolationError("gamma2 must be positive")
    d = y.shape[0]
    sd = np.sqrt(gamma2)
    accepted = []
    n_acc = 0
    proposed = 0
    cap = 10 * N
    while n_acc < N and proposed < cap:
        size = min(batch, cap - proposed)
        w = sd * rng.standard_normal((size, d))
        proposed += size
        if P.m == 0:
            keep = w
        else:
            ok = np.all((y + w) @ P.A.T <= P.b, axis=1)
            keep = w[ok]
        if keep.shape[0]:
            accepted.append(keep)
            n_acc += keep.shape[0]
    if n_acc < min(N, 100):
        rate = n_acc / proposed if proposed else 0.0
        raise LowAcceptanceError(
            f"acceptance rate {rate:.2e} too low for a trustworthy moment", rate=rate)
    w_acc = np.concatenate(accepted, axis=0)[:N]
    return w_acc.mean(axis=0)
