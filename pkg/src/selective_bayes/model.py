"""Core probabilistic objects: polytopes, generative models, priors, targets.

Everything here is immutable after construction and shared freely across
modules. All dense solves go through guarded_solve, which rejects systems
with an estimated condition number above 1e12 rather than silently
returning garbage.
"""

from dataclasses import dataclass, field

import numpy as np

from .errors import ContractViolationError, DegenerateDesignError

COND_LIMIT = 1e12


def _as_matrix(a, name):
    a = np.atleast_2d(np.asarray(a, dtype=float))
    if a.ndim != 2:
        raise ContractViolationError(f"{name} must be a matrix")
    return a


def _as_vector(v, name):
    v = np.asarray(v, dtype=float).reshape(-1)
    return v


def guarded_solve(A, B):
    """Solve A X = B for square A, rejecting ill-conditioned systems."""
    A = np.asarray(A, dtype=float)
    if np.linalg.cond(A) > COND_LIMIT:
        raise DegenerateDesignError(
            f"linear system condition number exceeds {COND_LIMIT:g}")
    return np.linalg.solve(A, B)


@dataclass(frozen=True, eq=False)
class Polytope:
    """Affine constraint system {z : A z <= b}.

    A is m x d with no zero rows; b has length m. Membership is decided
    through slack(z) = b - A z (all entries >= 0 means inside, all > 0
    strictly interior).
    """

    A: np.ndarray
    b: np.ndarray
    m: int = field(init=False)
    d: int = field(init=False)

    def __post_init__(self):
        A = np.asarray(self.A, dtype=float)
        if A.size == 0:
            A = A.reshape(0, A.shape[1] if A.ndim == 2 else 0)
        elif A.ndim != 2:
            raise ContractViolationError("A must be two dimensional")
        b = np.asarray(self.b, dtype=float).reshape(-1)
        if A.shape[0] != b.shape[0]:
            raise ContractViolationError(
                f"A has {A.shape[0]} rows but b has length {b.shape[0]}")
        if A.shape[0] > 0 and np.any(np.all(A == 0.0, axis=1)):
            raise ContractViolationError("A contains a zero row")
        A = A.copy()
        b = b.copy()
        A.setflags(write=False)
        b.setflags(write=False)
        object.__setattr__(self, "A", A)
        object.__setattr__(self, "b", b)
        object.__setattr__(self, "m", A.shape[0])
        object.__setattr__(self, "d", A.shape[1])

    def slack(self, z):
        return polytope_slack(self, z)

    def contains(self, z, tol=0.0):
        if self.m == 0:
            return True
        return bool(np.all(self.slack(z) >= -tol))


def vacuous_polytope(d):
    """Polytope with zero rows: every z in R^d is interior."""
    return Polytope(np.zeros((0, d)), np.zeros(0))


def polytope_slack(P, z):
    """Componentwise slack b - A z; strictly interior iff all entries > 0."""
    z = _as_vector(z, "z")
    if z.shape[0] != P.d:
        raise ContractViolationError(
            f"point has dimension {z.shape[0]}, polytope expects {P.d}")
    if P.m == 0:
        return np.zeros(0)
    return P.b - P.A @ z


@dataclass(frozen=True, eq=False)
class GenerativeModel:
    """Gaussian linear model Y ~ N(X* beta, sigma2 I) with selected design X_E.

    X_star = identity (k = n) is the saturated model; X_star = X_E the
    selected model. X_E must be numerically full column rank.
    """

    X_star: np.ndarray
    sigma2: float
    X_E: np.ndarray

    def __post_init__(self):
        X_star = _as_matrix(self.X_star, "X_star")
        X_E = _as_matrix(self.X_E, "X_E")
        if X_star.shape[0] != X_E.shape[0]:
            raise ContractViolationError("X_star and X_E row counts differ")
        if not np.isfinite(self.sigma2) or self.sigma2 <= 0:
            raise ContractViolationError("sigma2 must be a positive scalar")
        sv = np.linalg.svd(X_E, compute_uv=False)
        if sv.size == 0 or sv[-1] <= 1e-10 * sv[0]:
            raise DegenerateDesignError("X_E is rank deficient")
        X_star = X_star.copy()
        X_E = X_E.copy()
        X_star.setflags(write=False)
        X_E.setflags(write=False)
        object.__setattr__(self, "X_star", X_star)
        object.__setattr__(self, "X_E", X_E)

    @property
    def n(self):
        return self.X_star.shape[0]

    @property
    def k(self):
        return self.X_star.shape[1]


@dataclass(frozen=True, eq=False)
class Prior:
    """Smooth prior on the model parameter.

    kind 'flat' is improper with log density 0 everywhere; 'gaussian' is
    zero-mean N(0, tau2); 'mixture' is a two-component zero-mean scale
    mixture with the given weights and variances, iid across coordinates.
    """

    kind: str
    tau2: float = 1.0
    weights: tuple = (0.9, 0.1)
    variances: tuple = (0.1, 3.0)

    def __post_init__(self):
        if self.kind not in ("flat", "gaussian", "mixture"):
            raise ContractViolationError(f"unknown prior kind {self.kind!r}")
        if self.kind == "gaussian" and self.tau2 <= 0:
            raise ContractViolationError("gaussian prior needs tau2 > 0")
        if self.kind == "mixture":
            w = np.asarray(self.weights, dtype=float)
            v = np.asarray(self.variances, dtype=float)
            if w.shape != (2,) or v.shape != (2,):
                raise ContractViolationError("mixture takes two components")
            if abs(w.sum() - 1.0) > 1e-12 or np.any(w <= 0):
                raise ContractViolationError("mixture weights must be positive and sum to 1")
            if np.any(v <= 0):
                raise ContractViolationError("mixture variances must be positive")
            object.__setattr__(self, "weights", (float(w[0]), float(w[1])))
            object.__setattr__(self, "variances", (float(v[0]), float(v[1])))

    @property
    def log_concave(self):
        return self.kind in ("flat", "gaussian")

    def sample(self, size, rng):
        """Draw iid coordinates; used by simulations, not by inference."""
        if self.kind == "flat":
            raise ContractViolationError("flat prior cannot be sampled")
        if self.kind == "gaussian":
            return rng.normal(0.0, np.sqrt(self.tau2), size=size)
        comp = rng.random(size) < self.weights[0]
        sd = np.where(comp, np.sqrt(self.variances[0]), np.sqrt(self.variances[1]))
        return rng.standard_normal(size) * sd


def log_prior_and_grad(prior, beta):
    """Log prior density (up to a constant) and its gradient at beta."""
    beta = _as_vector(beta, "beta")
    if not np.all(np.isfinite(beta)):
        raise ContractViolationError("beta must be finite")
    if prior.kind == "flat":
        return 0.0, np.zeros_like(beta)
    if prior.kind == "gaussian":
        val = -0.5 * float(beta @ beta) / prior.tau2
        grad = -beta / prior.tau2
        return val, grad
    # mixture: log sum of two zero-mean normals, coordinatewise
    w = np.asarray(prior.weights)
    v = np.asarray(prior.variances)
    # per-coordinate log density via logsumexp of the two components
    lg = (np.log(w)[None, :] - 0.5 * np.log(2 * np.pi * v)[None, :]
          - 0.5 * beta[:, None] ** 2 / v[None, :])
    mx = lg.max(axis=1, keepdims=True)
    dens = np.exp(lg - mx)
    val = float(np.sum(mx[:, 0] + np.log(dens.sum(axis=1))))
    # gradient: weighted average of component scores
    resp = dens / dens.sum(axis=1, keepdims=True)
    grad = -(resp * (beta[:, None] / v[None, :])).sum(axis=1)
    return val, grad


@dataclass(frozen=True, eq=False)
class TargetMap:
    """Linear map M = (X_E^T X_E)^{-1} X_E^T X* sending beta* to the
    population least-squares target of the selected design."""

    M: np.ndarray

    def __post_init__(self):
        M = _as_matrix(self.M, "M")
        M = M.copy()
        M.setflags(write=False)
        object.__setattr__(self, "M", M)

    def apply(self, beta_star):
        beta_star = _as_vector(beta_star, "beta_star")
        if beta_star.shape[0] != self.M.shape[1]:
            raise ContractViolationError("target map dimension mismatch")
        return self.M @ beta_star


def target_map(E, X, X_star):
    """Build the selected-target map for active set E of design X.

    Returns TargetMap with M = (X_E^T X_E)^{-1} X_E^T X*; when X* equals
    X_E the map is the identity.
    """
    X = _as_matrix(X, "X")
    X_star = _as_matrix(X_star, "X_star")
    E = list(E)
    X_E = X[:, E]
    sv = np.linalg.svd(X_E, compute_uv=False)
    if sv.size == 0 or sv[-1] <= 1e-10 * sv[0]:
        raise DegenerateDesignError("X_E is rank deficient")
    M = guarded_solve(X_E.T @ X_E, X_E.T @ X_star)
    return TargetMap(np.atleast_2d(M))
