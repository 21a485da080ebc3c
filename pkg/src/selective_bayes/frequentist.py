"""Frequentist companions to the barrier machinery.

Two consumers of the same inner solver: the randomized approximate UMVUE
(a Rao-Blackwellized unbiased estimate computed from the barrier optimizer)
and the UMPU conditional density of one selected coefficient on a grid,
obtained by integrating out the nuisance directions with a barrier solve
per grid point.
"""

from dataclasses import dataclass

import numpy as np
import scipy.linalg
from scipy.integrate import cumulative_trapezoid, trapezoid

from .adjustment import barrier_geometry, find_interior
from .errors import (ContractViolationError, DegenerateDesignError,
                     GridRangeError, InfeasibleStartError, WrongRegimeError)
from .model import Polytope

STATIONARITY_TOL = 1e-9


@dataclass(frozen=True, eq=False)
class DensityGrid:
    """Normalized density of a scalar statistic on an ordered grid."""

    t_values: np.ndarray
    log_density: np.ndarray
    normalization: float

    def __post_init__(self):
        t = np.asarray(self.t_values, dtype=float).reshape(-1)
        ld = np.asarray(self.log_density, dtype=float).reshape(-1)
        if t.shape != ld.shape or t.shape[0] < 3:
            raise ContractViolationError("grid and density shapes disagree")
        if np.any(np.diff(t) <= 0.0):
            raise ContractViolationError("t_values must be strictly increasing")
        total = trapezoid(np.exp(ld), t)
        if abs(total - 1.0) > 1e-6:
            raise ContractViolationError(
                f"normalized density integrates to {total!r}, not 1")
        t = t.copy()
        ld = ld.copy()
        t.setflags(write=False)
        ld.setflags(write=False)
        object.__setattr__(self, "t_values", t)
        object.__setattr__(self, "log_density", ld)

    @property
    def density(self):
        return np.exp(self.log_density)

    def cdf(self):
        """Trapezoid CDF on the grid (starts at 0, clipped to [0, 1])."""
        F = cumulative_trapezoid(self.density, self.t_values, initial=0.0)
        return np.clip(F, 0.0, 1.0)


def _make_grid(t_values, raw_log_density):
    finite = np.isfinite(raw_log_density)
    if not np.any(finite):
        raise ContractViolationError("density vanishes on the whole grid")
    peak = float(np.max(raw_log_density[finite]))
    total = trapezoid(np.exp(raw_log_density - peak), t_values)
    normalization = peak + float(np.log(total))
    return DensityGrid(t_values=t_values,
                       log_density=raw_log_density - normalization,
                       normalization=normalization)


def umvue_randomized(y, P, sigma2, gamma2):
    """Approximate randomized UMVUE (saturated model).

    T(y) = (1 + sigma2/gamma2) y - (sigma2/gamma2) z*(y) where z* maximizes
    z^T y / gamma2 - ||z||^2/(2 gamma2) - sum_i log(1 + gamma/slack_i),
    the same interior problem the barrier adjustment solves at noise scale
    gamma. Deep in the interior z* -> y, so T -> y.
    """
    if gamma2 <= 0:
        raise WrongRegimeError("the UMVUE needs a randomized fit (gamma2 > 0)")
    if sigma2 <= 0:
        raise ContractViolationError("sigma2 must be positive")
    y = np.asarray(y, dtype=float).reshape(-1)
    if y.shape[0] != P.d:
        raise ContractViolationError("y dimension does not match the polytope")
    ratio = sigma2 / gamma2
    if P.m == 0:
        return y.copy()
    geo = barrier_geometry(P)
    if geo.rank == 0:
        return y.copy()
    s0 = P.b - P.A @ y
    if np.all(s0 > 0.0):
        w0 = np.zeros(geo.rank)
    else:
        z_int = find_interior(P)
        if z_int is None:
            raise InfeasibleStartError("selection event has no interior point")
        w0 = geo.Q.T @ (z_int - y)
    gamma = float(np.sqrt(gamma2))
    w, _, _, _, _ = geo.newton(s0, w0, gamma, tol=STATIONARITY_TOL)
    z_star = y + geo.Q @ w
    return (1.0 + ratio) * y - ratio * z_star


def umpu_density_grid(y, j, model, P, beta_null, grid=None):
    """Conditional density grid of one selected coefficient's statistic.

    Writes y = (projection on the other selected columns) + T * X_j_perp + V
    with X_j_perp the j-th selected column residualized on the others and
    T = X_j_perp^T y / ||X_j_perp||^2. For each grid value t the density is
    the Gaussian factor around beta_null times exp(-h) where h is the
    barrier adjustment of the selection event restricted to the nuisance
    V ~ N(0, sigma^2 (I - P_E)), computed in the orthogonal-complement
    coordinates so the covariance is nondegenerate. Constraint rows that do
    not touch V are dropped when satisfied; when violated the event is
    empty and the density vanishes at that t.
    """
    X_E = model.X_E
    if X_E is None:
        raise ContractViolationError("model must carry the selected columns")
    y = np.asarray(y, dtype=float).reshape(-1)
    n, k = X_E.shape
    if y.shape[0] != n or P.d != n:
        raise ContractViolationError("dimensions of y, X_E and P disagree")
    if not 0 <= j < k:
        raise ContractViolationError("j must index a selected column")
    sv = np.linalg.svd(X_E, compute_uv=False)
    if sv[-1] <= 1e-10 * sv[0]:
        raise DegenerateDesignError("selected design is rank deficient")
    sigma2 = model.sigma2

    X_j = X_E[:, j]
    X_rest = np.delete(X_E, j, axis=1)
    if X_rest.shape[1]:
        coef, *_ = np.linalg.lstsq(X_rest, X_j, rcond=None)
        X_j_perp = X_j - X_rest @ coef
        proj_rest = X_rest @ np.linalg.lstsq(X_rest, y, rcond=None)[0]
    else:
        X_j_perp = X_j.copy()
        proj_rest = np.zeros(n)
    norm2 = float(X_j_perp @ X_j_perp)
    if np.sqrt(norm2) < 1e-10:
        raise DegenerateDesignError("selected column is collinear with the rest")

    t_obs = float(X_j_perp @ y) / norm2
    cond_sd = float(np.sqrt(sigma2 / norm2))
    if grid is None:
        grid = np.linspace(t_obs - 8.0 * cond_sd, t_obs + 8.0 * cond_sd, 801)
    grid = np.asarray(grid, dtype=float).reshape(-1)
    if np.any(np.diff(grid) <= 0.0):
        raise ContractViolationError("grid must be strictly increasing")
    if grid[0] > t_obs - 6.0 * cond_sd or grid[-1] < t_obs + 6.0 * cond_sd:
        raise ContractViolationError(
            "grid must span six conditional standard deviations around T")

    gauss = -0.5 * norm2 * (grid - beta_null) ** 2 / sigma2
    if P.m == 0:
        return _make_grid(grid, gauss)

    # nuisance coordinates: u with V = Q_V u, u ~ N(0, sigma^2 I)
    Q_V = scipy.linalg.null_space(X_E.T)
    b_tilde = P.b - P.A @ proj_rest
    a_t = P.A @ X_j_perp  # b'(t) = b_tilde - t * a_t
    if Q_V.shape[1] == 0:
        # no nuisance left: the event is a deterministic window in t
        raw = np.where(
            (b_tilde[None, :] - np.outer(grid, a_t)) >= 0.0, 0.0, -np.inf
        ).sum(axis=1) + gauss
        return _make_grid(grid, raw)
    A_V = P.A @ Q_V
    row_scale = np.max(np.abs(A_V), axis=1)
    live = row_scale > 1e-12 * max(1.0, float(np.max(row_scale, initial=0.0)))
    A_live = A_V[live]
    a_live, b_live = a_t[live], b_tilde[live]
    a_dead, b_dead = a_t[~live], b_tilde[~live]

    sigma = float(np.sqrt(sigma2))
    u_obs = Q_V.T @ y
    log_mass = np.full(grid.shape, -np.inf)
    if A_live.shape[0] == 0:
        geo = None
    else:
        geo = barrier_geometry(Polytope(A_live, b_live - t_obs * a_live))

    # sweep outward from the grid point nearest the observed statistic so
    # each barrier solve warm starts from its neighbor
    center = int(np.argmin(np.abs(grid - t_obs)))
    order = sorted(range(grid.shape[0]), key=lambda i: (abs(i - center), i))
    warm = {}
    for i in order:
        t = grid[i]
        if b_dead.size and np.any(b_dead - t * a_dead < 0.0):
            continue  # event empty: a constraint without V slack is violated
        if geo is None or geo.rank == 0:
            log_mass[i] = 0.0
            continue
        s0 = b_live - t * a_live
        w0 = None
        neighbor = warm.get(i - 1) if i > center else warm.get(i + 1)
        for cand in (neighbor, geo.Q.T @ u_obs):
            if cand is not None and np.all(s0 - geo.G @ cand > 0.0):
                w0 = cand
                break
        if w0 is None:
            z_int = find_interior(Polytope(A_live, s0))
            if z_int is None:
                continue  # empty or degenerate slice: no density mass
            w0 = geo.Q.T @ z_int
            if np.any(s0 - geo.G @ w0 <= 0.0):
                continue
        w, _, h, _, _ = geo.newton(s0, w0, sigma, tol=1e-9)
        warm[i] = w
        log_mass[i] = -h

    return _make_grid(grid, gauss + log_mass)


def selective_pvalue_from_grid(g, t_obs):
    """Equal-tailed p-value 2 min(F, 1-F) from the grid's trapezoid CDF."""
    t = g.t_values
    t_obs = float(t_obs)
    if t_obs < t[0] or t_obs > t[-1]:
        raise GridRangeError("t_obs lies outside the density grid")
    F = cumulative_trapezoid(g.density, t, initial=0.0)
    Ft = float(np.interp(t_obs, t, F))
    total = float(F[-1])
    Ft = min(max(Ft, 0.0), total)
    p = 2.0 * min(Ft, total - Ft)
    return float(min(max(p, 0.0), 1.0))
