"""Lasso selection and the polyhedral event it induces.

lasso_fit solves min 0.5||y - X beta||^2 + lambda ||beta||_1 by cyclic
coordinate descent with a KKT stopping rule tight enough that the active
set and signs are exact. lasso_polytope turns (E, signs) into the affine
event {y : A_E y <= b_E} from the KKT conditions. randomize and carve_split
produce the smoothed and split variants of the selection context.
"""

from dataclasses import dataclass

import numpy as np

from .errors import (ContractViolationError, ConvergenceError,
                     DegenerateDesignError, EmptySelectionError,
                     InvalidSplitError)
from .model import Polytope, guarded_solve

KKT_TOL = 1e-9
ZERO_TOL = 1e-8
BOUNDARY_TOL = 1e-6
MAX_SWEEPS = 100000


@dataclass(frozen=True, eq=False)
class SelectionContext:
    """Everything inference conditions on.

    E: ordered active set; signs: entries in {-1,+1}; polytope: the event in
    the (first-stage) response space; gamma2: randomization variance (0 means
    nonrandomized); randomization_draw: the stored w when gamma2 > 0;
    carve_indices: (stage1, stage2) row partition or None; lam: Lasso penalty;
    boundary_warning: an inactive KKT score sits within 1e-6*lambda of the
    boundary, so the event is nearly degenerate.
    """

    E: tuple
    signs: np.ndarray
    polytope: Polytope
    lam: float
    gamma2: float = 0.0
    randomization_draw: np.ndarray = None
    carve_indices: tuple = None
    boundary_warning: bool = False

    def __post_init__(self):
        E = tuple(int(j) for j in self.E)
        if len(E) == 0:
            raise EmptySelectionError("selection context needs a nonempty E")
        if any(E[i] >= E[i + 1] for i in range(len(E) - 1)) or E[0] < 0:
            raise ContractViolationError("E must be strictly increasing and nonnegative")
        signs = np.asarray(self.signs, dtype=float).reshape(-1)
        if signs.shape[0] != len(E) or not np.all(np.abs(signs) == 1.0):
            raise ContractViolationError("signs must be +-1, one per active index")
        if self.lam <= 0:
            raise ContractViolationError("lambda must be positive")
        if self.gamma2 < 0:
            raise ContractViolationError("gamma2 must be nonnegative")
        if self.gamma2 > 0 and self.randomization_draw is not None:
            w = np.asarray(self.randomization_draw, dtype=float).reshape(-1)
            if w.shape[0] != self.polytope.d:
                raise ContractViolationError("randomization draw dimension mismatch")
            w = w.copy()
            w.setflags(write=False)
            object.__setattr__(self, "randomization_draw", w)
        signs = signs.copy()
        signs.setflags(write=False)
        object.__setattr__(self, "E", E)
        object.__setattr__(self, "signs", signs)
        if self.carve_indices is not None:
            s1, s2 = self.carve_indices
            s1 = tuple(int(i) for i in s1)
            s2 = tuple(int(i) for i in s2)
            object.__setattr__(self, "carve_indices", (s1, s2))

    @property
    def n_active(self):
        return len(self.E)


def _soft(x, t):
    return np.sign(x) * max(abs(x) - t, 0.0)


def lasso_fit(X, y, lam):
    """Cyclic coordinate descent for the Lasso at fixed lambda.

    Returns (E, signs, coefficients) where E is the ordered active set and
    coefficients is the full-length estimate. Raises EmptySelectionError if
    nothing is selected and ConvergenceError if the KKT residual cannot be
    driven below tolerance.
    """
    X = np.asarray(X, dtype=float)
    y = np.asarray(y, dtype=float).reshape(-1)
    if X.ndim != 2 or X.shape[0] != y.shape[0]:
        raise ContractViolationError("X and y are dimensionally incompatible")
    if lam <= 0:
        raise ContractViolationError("lambda must be positive")
    n, p = X.shape
    col_sq = np.einsum("ij,ij->j", X, X)
    if np.any(col_sq <= 0):
        raise DegenerateDesignError("design has a zero column")
    beta = np.zeros(p)
    r = y.copy()
    for _ in range(MAX_SWEEPS):
        for j in range(p):
            bj = beta[j]
            rho = X[:, j] @ r + col_sq[j] * bj
            bnew = _soft(rho, lam) / col_sq[j]
            if bnew != bj:
                r += X[:, j] * (bj - bnew)
                beta[j] = bnew
        # KKT residual, scaled by lambda
        g = X.T @ r
        active = beta != 0.0
        viol = 0.0
        if np.any(active):
            viol = np.max(np.abs(g[active] - lam * np.sign(beta[active]))) / lam
        if np.any(~active):
            viol = max(viol, max(np.max(np.abs(g[~active])) / lam - 1.0, 0.0))
        if viol <= KKT_TOL:
            break
    else:
        raise ConvergenceError(
            f"lasso coordinate descent did not reach KKT tolerance {KKT_TOL:g}")
    beta[np.abs(beta) <= ZERO_TOL * lam] = 0.0
    E = np.flatnonzero(beta)
    if E.size == 0:
        raise EmptySelectionError("lasso selected an empty active set")
    signs = np.sign(beta[E])
    return tuple(int(j) for j in E), signs, beta


def lasso_polytope(X, E, signs, lam):
    """Affine event {y : A y <= b} on which the Lasso returns (E, signs).

    Active rows pin the signs of the active coefficients; each inactive
    variable contributes the two rows of the subgradient bound. Row count is
    |E| + 2(p - |E|).
    """
    X = np.asarray(X, dtype=float)
    E = list(E)
    signs = np.asarray(signs, dtype=float).reshape(-1)
    n, p = X.shape
    X_E = X[:, E]
    sv = np.linalg.svd(X_E, compute_uv=False)
    if sv.size == 0 or sv[-1] <= 1e-10 * sv[0]:
        raise DegenerateDesignError("X_E is rank deficient")
    gram_inv = guarded_solve(X_E.T @ X_E, np.eye(len(E)))
    K = gram_inv @ X_E.T              # |E| x n, maps y to the LS coefficients
    P_E = X_E @ K                     # projection onto span(X_E)
    rows = []
    offs = []
    # sign constraints: s_i * (K y - lam * gram_inv s)_i > 0
    gs = gram_inv @ signs
    for i in range(len(E)):
        rows.append(-signs[i] * K[i])
        offs.append(-lam * signs[i] * gs[i])
    # inactive subgradient bounds
    inactive = [j for j in range(p) if j not in set(E)]
    resid_map = np.eye(n) - P_E
    for j in inactive:
        a = X[:, j] @ resid_map
        c = X[:, j] @ X_E @ gs
        rows.append(a)
        offs.append(lam * (1.0 - c))
        rows.append(-a)
        offs.append(lam * (1.0 + c))
    return Polytope(np.array(rows), np.array(offs))


def randomize(y, gamma2, rng):
    """Gaussian randomization: returns (y + w, w) with w ~ N(0, gamma2 I)."""
    y = np.asarray(y, dtype=float).reshape(-1)
    if gamma2 < 0:
        raise ContractViolationError("gamma2 must be nonnegative")
    w = rng.normal(0.0, np.sqrt(gamma2), size=y.shape[0])
    return y + w, w


def carve_split(n, holdout_fraction, rng):
    """Uniform row partition with round(holdout_fraction * n) holdout rows."""
    if not 0 < holdout_fraction < 1:
        raise ContractViolationError("holdout fraction must lie in (0, 1)")
    n2 = int(round(holdout_fraction * n))
    n1 = n - n2
    if n1 < 2 or n2 < 1:
        raise InvalidSplitError(f"split n1={n1}, n2={n2} is degenerate")
    perm = rng.permutation(n)
    stage2 = np.sort(perm[:n2])
    stage1 = np.sort(perm[n2:])
    return stage1, stage2


def selection_context(X, y, lam, gamma2=0.0, rng=None, holdout_fraction=None):
    """Run selection end to end and package the event.

    Plain: fit on (X, y). Randomized (gamma2 > 0): fit on y + w with stored
    w. Carved (holdout_fraction set): fit on the stage-1 rows only, polytope
    in the stage-1 response space. Randomization and carving are separate
    regimes and cannot be combined. Returns (ctx, lasso_coefficients).
    """
    X = np.asarray(X, dtype=float)
    y = np.asarray(y, dtype=float).reshape(-1)
    if gamma2 > 0 and holdout_fraction is not None:
        raise ContractViolationError("randomization and carving are exclusive")
    carve = None
    w = None
    if holdout_fraction is not None:
        s1, s2 = carve_split(X.shape[0], holdout_fraction, rng)
        X_sel, y_sel = X[s1], y[s1]
        carve = (s1, s2)
    elif gamma2 > 0:
        y_sel, w = randomize(y, gamma2, rng)
        X_sel = X
    else:
        X_sel, y_sel = X, y
    E, signs, beta = lasso_fit(X_sel, y_sel, lam)
    P = lasso_polytope(X_sel, E, signs, lam)
    # near-boundary diagnostic on the inactive scores
    resid = y_sel - X_sel @ beta
    g = X_sel.T @ resid
    inactive = np.ones(X.shape[1], dtype=bool)
    inactive[list(E)] = False
    warning = bool(np.any(np.abs(np.abs(g[inactive]) - lam) <= BOUNDARY_TOL * lam)) \
        if np.any(inactive) else False
    ctx = SelectionContext(E=E, signs=signs, polytope=P, lam=lam, gamma2=gamma2,
                           randomization_draw=w, carve_indices=carve,
                           boundary_warning=warning)
    return ctx, beta
