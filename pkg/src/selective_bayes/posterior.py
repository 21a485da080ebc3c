"""Selection-adjusted posteriors and the Langevin sampler.

The log posterior is log pi(beta) - ||y - X* beta||^2 / (2 sigma^2) plus the
barrier adjustment h evaluated at the mean X* beta (at variance sigma^2 for
plain and carved regimes, sigma^2 + gamma^2 for randomized; carving adjusts
only the stage-1 block and adds the holdout as an ordinary Gaussian term).

The sampler is the unadjusted Langevin walk
    beta_{K+1} = beta_K + step * grad log pi_S(beta_K) + sqrt(2 step) * eps_K
with no accept-reject step; its stationary bias is quantified against a
quadrature oracle in the tests rather than corrected.
"""

import weakref
from dataclasses import dataclass

import numpy as np

from .adjustment import NEWTON_TOL, barrier_geometry, find_interior
from .errors import (ContractViolationError, DivergenceError,
                     InfeasibleStartError, InsufficientSamplesError,
                     WrongRegimeError)
from .model import guarded_solve, log_prior_and_grad
from .rng import task_rng

REGIMES = ("plain", "randomized", "carved")
DEFAULT_DRAWS = 20000
BURN_IN_FRACTION = 0.1
MAX_STEP_HALVINGS = 10


@dataclass(frozen=True, eq=False)
class PosteriorSpec:
    """Bundle of model, prior, selection context, regime and data."""

    model: object
    prior: object
    ctx: object
    regime: str
    data: np.ndarray

    def __post_init__(self):
        if self.regime not in REGIMES:
            raise ContractViolationError(f"unknown regime {self.regime!r}")
        if self.regime == "randomized" and self.ctx.gamma2 <= 0:
            raise WrongRegimeError("randomized regime needs gamma2 > 0")
        if self.regime == "carved" and self.ctx.carve_indices is None:
            raise WrongRegimeError("carved regime needs carve indices")
        y = np.asarray(self.data, dtype=float).reshape(-1)
        if y.shape[0] != self.model.n:
            raise ContractViolationError("data length does not match the model")
        expected_d = y.shape[0]
        if self.regime == "carved":
            expected_d = len(self.ctx.carve_indices[0])
        if self.ctx.polytope.d != expected_d:
            raise ContractViolationError("polytope lives in the wrong space")
        y = y.copy()
        y.setflags(write=False)
        object.__setattr__(self, "data", y)

    @property
    def adjustment_variance(self):
        if self.regime == "randomized":
            return self.model.sigma2 + self.ctx.gamma2
        return self.model.sigma2


@dataclass(frozen=True, eq=False)
class PosteriorChain:
    """Ordered draws plus the burn-in marker and sampler metadata."""

    draws: np.ndarray
    burn_in: int
    step: float
    seed: int
    accept_all: bool = True

    def __post_init__(self):
        draws = np.asarray(self.draws, dtype=float)
        if draws.ndim == 1:
            draws = draws[:, None]
        if draws.shape[0] < self.burn_in + 100:
            raise ContractViolationError("chain must contain burn_in + 100 draws")
        if not np.all(np.isfinite(draws)):
            raise ContractViolationError("chain contains non-finite draws")
        draws = draws.copy()
        draws.setflags(write=False)
        object.__setattr__(self, "draws", draws)

    @property
    def kept(self):
        return self.draws[self.burn_in:]


class _PosteriorEngine:
    """Precomputed small-dimension quantities for fast repeated gradients.

    All per-step work happens in at most rank(A)-dimensional coordinates:
    slacks are (b - A X_sel beta) - G w and X_sel^T z* reduces to
    Gram beta + (Q^T X_sel)^T w, so no response-length vector is touched
    inside the chain loop. Successive calls warm start the inner Newton
    solve from the previous optimizer.
    """

    def __init__(self, spec):
        self.spec = spec
        model, ctx = spec.model, spec.ctx
        y = spec.data
        X = model.X_star
        self.sigma2 = model.sigma2
        self.adj_var = spec.adjustment_variance
        self.adj_sigma = float(np.sqrt(self.adj_var))
        self.prior = spec.prior
        P = ctx.polytope
        self.P = P
        if spec.regime == "carved":
            s1, s2 = ctx.carve_indices
            X_sel = X[list(s1), :]
            z_int = y[list(s1)]
        elif spec.regime == "randomized":
            X_sel = X
            if ctx.randomization_draw is not None:
                z_int = y + ctx.randomization_draw
            else:
                z_int = find_interior(P)
                if z_int is None:
                    raise InfeasibleStartError(
                        "no interior point available for the randomized event")
        else:
            X_sel = X
            z_int = y
        self.geo = barrier_geometry(P)
        self.AX = P.A @ X_sel if P.m else np.zeros((0, X.shape[1]))
        self.QtX = self.geo.Q.T @ X_sel
        self.Qt_zint = self.geo.Q.T @ z_int if P.m else np.zeros(0)
        self.gram = X.T @ X
        self.Xty = X.T @ y
        self.yy = float(y @ y)
        self._w = None
        self._z_fallback = None

    def feasible_w0(self, beta, s0):
        """Strictly feasible inner start: previous optimizer, then the
        anchor response, then any interior point of the event (the anchor
        leaves the event when the spec carries counterfactual data)."""
        w0 = self._w
        if w0 is not None and np.all(s0 - self.geo.G @ w0 > 0.0):
            return w0
        w0 = self.Qt_zint - self.QtX @ beta
        if np.all(s0 - self.geo.G @ w0 > 0.0):
            return w0
        if self._z_fallback is None:
            z0 = find_interior(self.P)
            if z0 is None:
                raise InfeasibleStartError(
                    "selection event has no interior point")
            self._z_fallback = z0
        return self.geo.Q.T @ self._z_fallback - self.QtX @ beta

    def value_and_grad(self, beta, tol=NEWTON_TOL):
        beta = np.asarray(beta, dtype=float).reshape(-1)
        lp, lp_grad = log_prior_and_grad(self.prior, beta)
        gb = self.gram @ beta
        lik = -0.5 * (float(beta @ gb) - 2.0 * float(self.Xty @ beta)
                      + self.yy) / self.sigma2
        lik_grad = (self.Xty - gb) / self.sigma2
        if self.geo.rank == 0:
            return lik + lp, lik_grad + lp_grad
        s0 = self.P.b - self.AX @ beta
        w0 = self.feasible_w0(beta, s0)
        w, t, h, gnorm, iters = self.geo.newton(s0, w0, self.adj_sigma, tol=tol)
        self._w = w
        adj_grad = -(self.QtX.T @ w) / self.adj_var
        return lik + h + lp, lik_grad + adj_grad + lp_grad


_engine_cache = weakref.WeakKeyDictionary()


def _engine(spec):
    eng = _engine_cache.get(spec)
    if eng is None:
        eng = _PosteriorEngine(spec)
        _engine_cache[spec] = eng
    return eng


def log_posterior_grad(spec, beta):
    """Selection-adjusted log posterior (up to a constant) and gradient."""
    return _engine(spec).value_and_grad(beta)


def default_step(spec):
    """0.5 sigma^2 over the largest eigenvalue of X*^T X*."""
    gram = spec.model.X_star.T @ spec.model.X_star
    lam_max = float(np.linalg.eigvalsh(gram)[-1])
    return 0.5 * spec.model.sigma2 / lam_max


def default_init(spec):
    """Unadjusted least-squares estimate in the model's parameter space."""
    X = spec.model.X_star
    return guarded_solve(X.T @ X, X.T @ spec.data)


def langevin_sample(spec, init, n_draws, step, rng, burn_in=None, seed=0):
    """Unadjusted Langevin chain of n_draws iterates.

    Deterministic under a fixed generator. Raises DivergenceError with the
    offending iteration index if an iterate goes non-finite (step too
    large). burn_in defaults to 10% of n_draws and is metadata only; all
    iterates are returned.
    """
    if step <= 0:
        raise ContractViolationError("step must be positive")
    init = np.asarray(init, dtype=float).reshape(-1)
    if not np.all(np.isfinite(init)):
        raise ContractViolationError("init must be finite")
    if burn_in is None:
        burn_in = int(BURN_IN_FRACTION * n_draws)
    engine = _PosteriorEngine(spec)
    k = init.shape[0]
    noise = rng.standard_normal((n_draws, k)) * np.sqrt(2.0 * step)
    draws = np.empty((n_draws, k))
    beta = init.copy()
    for i in range(n_draws):
        _, grad = engine.value_and_grad(beta)
        beta = beta + step * grad + noise[i]
        if not np.all(np.isfinite(beta)):
            raise DivergenceError(
                f"non-finite iterate at step {i}", iteration=i)
        draws[i] = beta
    return PosteriorChain(draws=draws, burn_in=burn_in, step=step, seed=seed)


def sample_posterior(spec, n_draws=DEFAULT_DRAWS, step=None, burn_in=None,
                     root_seed=0, task_index=0, init=None):
    """Convenience front end: default step and init, divergence halving.

    The step starts at default_step(spec) (or the given value) and is halved
    on divergence at most 10 times.
    """
    if step is None:
        step = default_step(spec)
    if init is None:
        init = default_init(spec)
    for _ in range(MAX_STEP_HALVINGS + 1):
        rng = task_rng(root_seed, task_index)
        try:
            return langevin_sample(spec, init, n_draws, step, rng,
                                   burn_in=burn_in, seed=root_seed)
        except DivergenceError:
            step *= 0.5
    raise DivergenceError("chain still diverges after 10 step halvings")


def _mapped(chain, M):
    return chain.kept @ M.M.T


def credible_interval(chain, M, level):
    """Equal-tails credible intervals per mapped coordinate."""
    if not 0.0 < level < 1.0:
        raise ContractViolationError("level must lie in (0, 1)")
    kept = chain.kept
    if kept.shape[0] < 100:
        raise InsufficientSamplesError("need at least 100 post burn-in draws")
    alpha = 1.0 - level
    vals = _mapped(chain, M)
    lo = np.quantile(vals, alpha / 2.0, axis=0)
    hi = np.quantile(vals, 1.0 - alpha / 2.0, axis=0)
    return np.column_stack([lo, hi])


def posterior_mean(chain, M):
    """Mean of the mapped post burn-in draws."""
    kept = chain.kept
    if kept.shape[0] < 100:
        raise InsufficientSamplesError("need at least 100 post burn-in draws")
    return _mapped(chain, M).mean(axis=0)
