"""Exit-rate algebra for fuzzy metastable sets.

Given a membership chi with (approximately) L* chi = alpha chi + beta 1,
the chi-holding probability decays as chi(x) e^{-eps1 t} with
eps1 = alpha + beta; eps2 = -beta is the occupation penalty rate and
pi_chi = -beta/alpha the statistical weight.  The report is meaningful
when eps2 < eps1, equivalently pi_chi < 1/2.  Three routes produce the
same report on an exact eigenspace: directly from an eigenpair, by
regressing the generator action, or by regressing propagated values
(P^tau chi vs chi) and inverting gamma1 = e^{-tau alpha}.
"""

import math
from dataclasses import dataclass
from typing import Optional, Tuple

import numpy as np
import scipy.sparse as sp
from scipy.optimize import linprog
from scipy.sparse.csgraph import connected_components
from scipy.sparse.linalg import spsolve

from .grid_generator import GeneratorMatrix

Array = np.ndarray

_NORM_NAMES = {
    "ls": "least_squares",
    "least_squares": "least_squares",
    "lad": "least_absolute",
    "least_absolute": "least_absolute",
}


@dataclass(frozen=True)
class RegressionResult:
    """A fit ys ~ gamma1 * xs + gamma2.

    Attributes
    ----------
    gamma1, gamma2 : float
        Slope and intercept.
    residual_norm : float
        L2 norm of the residuals for least squares, L1 for least
        absolute deviation.
    n_points : int
        Sample size.
    norm_kind : str
        "least_squares" or "least_absolute".
    """

    gamma1: float
    gamma2: float
    residual_norm: float
    n_points: int
    norm_kind: str


@dataclass(frozen=True)
class ExitRateReport:
    """Rates of one fuzzy set.

    eps1 = alpha + beta is the chi-exit rate, eps2 = -beta the penalty
    rate, pi_chi the statistical-weight estimate, and meaningful is the
    eps2 < eps1 criterion (equivalently pi_chi < 1/2).  residual_norm
    and n_points describe the regression behind the report, when any.
    """

    alpha: float
    beta: float
    eps1: float
    eps2: float
    pi_chi: float
    meaningful: bool
    provenance: str
    tau: Optional[float] = None
    residual_norm: float = float("nan")
    n_points: int = 0
    norm_kind: str = "exact"
    note: str = ""

    def as_row(self) -> dict:
        """All fields, CSV-ready."""
        return {
            "provenance": self.provenance,
            "alpha": self.alpha,
            "beta": self.beta,
            "eps1": self.eps1,
            "eps2": self.eps2,
            "pi_chi": self.pi_chi,
            "meaningful": int(self.meaningful),
            "tau": "" if self.tau is None else self.tau,
            "residual_norm": self.residual_norm,
            "n_points": self.n_points,
            "norm_kind": self.norm_kind,
            "note": self.note,
        }


def regress(xs, ys, norm_kind: str = "least_squares") -> RegressionResult:
    """Fit ys ~ gamma1 * xs + gamma2.

    Parameters
    ----------
    xs, ys : array-like
        Equal lengths >= 2; xs must not be constant.
    norm_kind : str
        "least_squares"/"ls" or "least_absolute"/"lad".

    Returns
    -------
    RegressionResult
    """
    try:
        kind = _NORM_NAMES[norm_kind]
    except KeyError:
        raise ValueError("unknown regression norm %r" % (norm_kind,)) from None
    xs = np.asarray(xs, dtype=float).ravel()
    ys = np.asarray(ys, dtype=float).ravel()
    if xs.size != ys.size:
        raise ValueError("xs and ys must have equal length")
    if xs.size < 2:
        raise ValueError("regression needs at least two points")
    if xs.max() - xs.min() < 1e-14:
        raise ValueError("degenerate regression: predictor has zero variance")
    n = xs.size
    if kind == "least_squares":
        design = np.column_stack([xs, np.ones(n)])
        coef, _, _, _ = np.linalg.lstsq(design, ys, rcond=None)
        g1, g2 = float(coef[0]), float(coef[1])
        resid = float(np.linalg.norm(ys - g1 * xs - g2))
    else:
        # LAD as a linear program: min sum(u+v), y - g1 x - g2 = u - v
        eye = sp.identity(n, format="csc")
        a_eq = sp.hstack(
            [sp.csc_matrix(xs[:, None]), sp.csc_matrix(np.ones((n, 1))),
             eye, -eye],
            format="csc",
        )
        c = np.concatenate([[0.0, 0.0], np.ones(2 * n)])
        bounds = [(None, None), (None, None)] + [(0, None)] * (2 * n)
        res = linprog(c, A_eq=a_eq, b_eq=ys, bounds=bounds, method="highs")
        if not res.success:
            raise RuntimeError("LAD regression failed: %s" % res.message)
        g1, g2 = float(res.x[0]), float(res.x[1])
        resid = float(np.abs(ys - g1 * xs - g2).sum())
    return RegressionResult(gamma1=g1, gamma2=g2, residual_norm=resid,
                            n_points=n, norm_kind=kind)


def gammas_to_rate(reg: RegressionResult, tau: float,
                   provenance: str = "regression") -> ExitRateReport:
    """Convert a (gamma1, gamma2) fit at lag tau into an exit-rate report.

    Inverts gamma1 = e^{-tau alpha} and gamma2 = (beta/alpha)(e^{-tau
    alpha} - 1).  gamma1 >= 1 means no measurable decay: the report is
    returned with the rates unset and the note "no decay detected".

    Parameters
    ----------
    reg : RegressionResult
    tau : float
        Lag time of the propagated values, > 0.
    provenance : str
        Recorded in the report.

    Returns
    -------
    ExitRateReport

    Raises
    ------
    ValueError
        When gamma1 <= 0 (lag time too long, noise dominated).
    """
    if tau <= 0:
        raise ValueError("tau must be positive")
    g1, g2 = reg.gamma1, reg.gamma2
    if g1 <= 0:
        raise ValueError(
            "lag time too long / noise dominated: gamma1 = %.6g <= 0" % g1
        )
    nan = float("nan")
    if g1 >= 1:
        return ExitRateReport(
            alpha=nan, beta=nan, eps1=nan, eps2=nan, pi_chi=nan,
            meaningful=False, provenance=provenance, tau=float(tau),
            residual_norm=reg.residual_norm, n_points=reg.n_points,
            norm_kind=reg.norm_kind, note="no decay detected",
        )
    alpha = -math.log(g1) / tau
    beta = alpha * g2 / (g1 - 1.0)
    eps1 = alpha + beta
    eps2 = -beta
    pi_chi = eps2 / (eps1 + eps2)
    return ExitRateReport(
        alpha=alpha, beta=beta, eps1=eps1, eps2=eps2, pi_chi=pi_chi,
        meaningful=bool(eps2 < eps1), provenance=provenance, tau=float(tau),
        residual_norm=reg.residual_norm, n_points=reg.n_points,
        norm_kind=reg.norm_kind,
    )


def rate_from_eigenpair(eps_bar: float, beta_bar: float,
                        provenance: str = "eigenpair") -> ExitRateReport:
    """Report from an eigenvalue and the shift of its rescaled eigenfunction.

    For chi = alpha_bar f + beta_bar 1 the generator acts exactly:
    L* chi = eps_bar chi - eps_bar beta_bar 1, so eps1 = eps_bar (1 -
    beta_bar), eps2 = eps_bar beta_bar, and pi_chi = beta_bar.

    Parameters
    ----------
    eps_bar : float
        Eigenvalue, > 0.
    beta_bar : float
        Shift in [0, 1]; equals the statistical weight.

    Returns
    -------
    ExitRateReport
    """
    if eps_bar <= 0:
        raise ValueError("eps_bar must be positive")
    if not 0 <= beta_bar <= 1:
        raise ValueError("beta_bar must lie in [0, 1]")
    alpha = float(eps_bar)
    beta = -alpha * float(beta_bar)
    return ExitRateReport(
        alpha=alpha, beta=beta, eps1=alpha + beta, eps2=-beta,
        pi_chi=float(beta_bar), meaningful=bool(-beta < alpha + beta),
        provenance=provenance,
    )


def regress_generator_action(gen: GeneratorMatrix, chi,
                             norm_kind: str = "least_squares"
                             ) -> ExitRateReport:
    """Report from regressing L* chi against (chi, 1) on the grid.

    Computes the sparse product L* chi exactly, fits L* chi ~ alpha chi
    + beta, and maps (alpha, beta) directly to the report (no lag-time
    conversion).

    Parameters
    ----------
    gen : GeneratorMatrix
    chi : Membership or ndarray
        Grid membership values.
    norm_kind : str
        Regression norm, as in :func:`regress`.

    Returns
    -------
    ExitRateReport
    """
    vals = getattr(chi, "values", None)
    if vals is None:
        vals = np.asarray(chi, dtype=float)
    if vals.shape != (gen.n,):
        raise ValueError("membership does not match the generator grid")
    action = gen.rates @ vals
    reg = regress(vals, action, norm_kind)
    alpha, beta = reg.gamma1, reg.gamma2
    eps1, eps2 = alpha + beta, -beta
    pi_chi = eps2 / (eps1 + eps2) if alpha > 0 else float("nan")
    return ExitRateReport(
        alpha=alpha, beta=beta, eps1=eps1, eps2=eps2, pi_chi=pi_chi,
        meaningful=bool(eps2 < eps1), provenance="generator_action",
        residual_norm=reg.residual_norm, n_points=reg.n_points,
        norm_kind=reg.norm_kind,
    )


def holding_probability(report: ExitRateReport, chi_at_x, t: float):
    """p_chi(x, t) = chi(x) e^{-eps1 t} under a meaningful report."""
    if t < 0:
        raise ValueError("t must be nonnegative")
    if not report.meaningful:
        raise ValueError("holding probability needs a meaningful report")
    return np.asarray(chi_at_x, dtype=float) * math.exp(-report.eps1 * t)


def chi_mean_holding_time(report: ExitRateReport, chi_at_x):
    """Fuzzy mean holding time t1(x) = chi(x) / eps1."""
    if not (report.eps1 > 0):
        raise ValueError("chi mean holding time needs eps1 > 0")
    return np.asarray(chi_at_x, dtype=float) / report.eps1


def set_mean_holding_time(gen: GeneratorMatrix, region_cells) -> Array:
    """Mean holding times of a crisp set: L* t = 1 inside, t = 0 outside.

    Parameters
    ----------
    gen : GeneratorMatrix
    region_cells : boolean mask (n,) or index array
        The set S; both S and its complement must be non-empty.

    Returns
    -------
    ndarray
        Mean holding time per cell, zero outside S.
    """
    mask = np.zeros(gen.n, dtype=bool)
    region_cells = np.asarray(region_cells)
    if region_cells.dtype == bool:
        if region_cells.shape != (gen.n,):
            raise ValueError("region mask does not match the grid")
        mask[:] = region_cells
    else:
        mask[region_cells.astype(np.int64)] = True
    if not mask.any():
        raise ValueError("region is empty")
    if mask.all():
        raise ValueError("region complement is empty; no absorbing boundary")
    L = gen.rates.tocsr()
    sub = L[mask][:, mask]
    # a region component with no edge to the complement never exits
    touch = np.asarray(np.abs(L[mask][:, ~mask]).sum(axis=1)).ravel() > 0
    ncomp, labels = connected_components(sub != 0, directed=False)
    for comp in range(ncomp):
        members = labels == comp
        if not touch[members].any():
            cells = np.nonzero(mask)[0][members]
            raise ValueError(
                "singular restricted system: region component without "
                "exit (%d cells, e.g. %s)" % (cells.size, cells[:8].tolist())
            )
    t = np.zeros(gen.n)
    t[mask] = spsolve(sub.tocsc(), np.ones(int(mask.sum())))
    return t


def exit_path_direction(chi, x, grid=None) -> Array:
    """Normalized exit direction -grad chi(x) on the cell lattice.

    The gradient uses central differences in the grid interior and
    one-sided differences at the edges.  For pcca_single memberships the
    direction is verified to be collinear with the eigenfunction's
    lattice gradient.

    Parameters
    ----------
    chi : Membership or ndarray
        Grid membership (or a raw eigenfunction with ``grid`` given).
    x : array-like, shape (2,)
        Position inside the domain.
    grid : RegularGrid, optional
        Required when chi is a plain array.

    Returns
    -------
    ndarray, shape (2,)
        Unit vector along -grad chi at the cell containing x.
    """
    meta = getattr(chi, "meta", {})
    vals = getattr(chi, "values", None)
    if vals is None:
        vals = np.asarray(chi, dtype=float)
    else:
        grid = grid if grid is not None else chi.grid
    if grid is None:
        raise ValueError("exit_path_direction needs a grid")
    cell = grid.cell_of(np.asarray(x, dtype=float))
    if cell < 0:
        raise ValueError("position outside the grid domain")
    h1, h2 = grid.spacing
    field = vals.reshape(grid.nx, grid.ny)
    g1, g2 = np.gradient(field, h1, h2)
    i, j = divmod(cell, grid.ny)
    # a strict local extremum among the lattice neighbors is a critical
    # cell even when the central difference does not vanish exactly
    center = field[i, j]
    neigh = [field[a, b]
             for a, b in ((i - 1, j), (i + 1, j), (i, j - 1), (i, j + 1))
             if 0 <= a < grid.nx and 0 <= b < grid.ny]
    if all(v < center for v in neigh) or all(v > center for v in neigh):
        raise ValueError("at a critical point of chi (local extremum cell)")
    vec = -np.array([g1[i, j], g2[i, j]])
    norm = float(np.linalg.norm(vec))
    if norm < 1e-10:
        raise ValueError("at a critical point of chi (gradient ~ 0)")
    direction = vec / norm
    f = meta.get("eigenfunction")
    if f is not None:
        e1, e2 = np.gradient(np.asarray(f).reshape(grid.nx, grid.ny), h1, h2)
        ref = -np.array([e1[i, j], e2[i, j]])
        ref_norm = float(np.linalg.norm(ref))
        if ref_norm > 1e-14 and abs(float(direction @ (ref / ref_norm))) < 1 - 1e-8:
            raise RuntimeError(
                "membership gradient is not collinear with its eigenfunction"
            )
    return direction


def dominance_timescale(chi_level: float, eps2: float) -> float:
    """Time beyond which the exponential rate law dominates.

    Returns -ln(chi) chi / ((1 - chi) eps2); the limit for chi -> 1 is
    1/eps2.

    Parameters
    ----------
    chi_level : float
        Membership level, strictly between 0 and 1.
    eps2 : float
        Penalty rate, > 0.
    """
    if not 0 < chi_level < 1:
        raise ValueError("chi_level must lie strictly between 0 and 1")
    if eps2 <= 0:
        raise ValueError("eps2 must be positive")
    return -math.log(chi_level) * chi_level / ((1.0 - chi_level) * eps2)


def fit_survival_rate(times, censored=None) -> float:
    """Exponential rate from an empirical survival curve.

    Sorts the exit-time samples, forms the survival fractions S(t_k) =
    (n - k)/n at the observed exits, and fits ln S ~ -rate * t by least
    squares (censored samples enter the curve but contribute no exit
    point).

    Parameters
    ----------
    times : array-like
        Exit times; censored entries hold the horizon.
    censored : array-like of bool, optional
        Marks entries that never exited.

    Returns
    -------
    float
        The fitted exit rate.

    Raises
    ------
    ValueError
        When fewer than two exits were observed (e.g. 100% censoring).
    """
    times = np.asarray(times, dtype=float).ravel()
    if censored is None:
        censored = np.zeros(times.shape, dtype=bool)
    censored = np.asarray(censored, dtype=bool).ravel()
    n = times.size
    exits = np.sort(times[~censored])
    if exits.size < 2:
        raise ValueError(
            "survival fit needs at least two observed exits "
            "(%d of %d censored)" % (int(censored.sum()), n)
        )
    survival = (n - np.arange(1, exits.size + 1)) / n
    keep = survival > 0
    if keep.sum() < 2:
        raise ValueError("survival curve degenerates after one exit")
    reg = regress(exits[keep], np.log(survival[keep]), "least_squares")
    return -reg.gamma1
