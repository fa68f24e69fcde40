"""Eigenpairs of L* and the transfer operator P^tau = exp(-tau L*).

All spectral work happens on the symmetrized matrix S = D L* D^-1 with
D = diag(sqrt(pi)); eigenvectors are transformed back to f = u / sqrt(pi),
which makes them orthonormal in the pi-weighted inner product
<u, v>_pi = sum_i u_i v_i pi_i.
"""

from dataclasses import dataclass

import numpy as np
from scipy.linalg import eigh
from scipy.sparse.linalg import ArpackNoConvergence, eigsh
from scipy.integrate import solve_ivp

from .grid_generator import GeneratorMatrix

Array = np.ndarray

#: Dense eigendecomposition below this size, iterative above.
DENSE_LIMIT = 4096


@dataclass(frozen=True)
class EigenSystem:
    """The k smallest eigenpairs of L*.

    Attributes
    ----------
    eigenvalues : ndarray
        Ascending, eigenvalues[0] ~ 0.
    eigenvectors : ndarray, shape (n, k)
        pi-orthonormal columns f_k, sign-fixed so the entry of largest
        magnitude is positive.
    weights : ndarray
        The stationary vector the orthonormality refers to.
    """

    eigenvalues: Array
    eigenvectors: Array
    weights: Array

    @property
    def count(self) -> int:
        return self.eigenvalues.size


def _check_detailed_balance(gen: GeneratorMatrix, tol: float = 1e-9) -> None:
    pi = gen.weights
    flux = gen.rates.multiply(pi[:, None])
    resid = abs(flux - flux.T).max()
    scale = abs(flux).max() or 1.0
    if resid > tol * scale:
        raise ValueError(
            "generator violates detailed balance (residual %.2e)" % resid
        )


def _fix_signs(vecs: Array) -> Array:
    out = vecs.copy()
    for k in range(out.shape[1]):
        j = int(np.argmax(np.abs(out[:, k])))
        if out[j, k] < 0:
            out[:, k] = -out[:, k]
    return out


def eigensolve(gen: GeneratorMatrix, k: int) -> EigenSystem:
    """Compute the k smallest eigenpairs of L*.

    Parameters
    ----------
    gen : GeneratorMatrix
        Must satisfy detailed balance.
    k : int
        Number of pairs, k <= n.

    Returns
    -------
    EigenSystem
    """
    n = gen.n
    if not 1 <= k <= n:
        raise ValueError("k must be between 1 and %d" % n)
    _check_detailed_balance(gen)
    sq = np.sqrt(gen.weights)
    if n <= DENSE_LIMIT:
        sym = gen.symmetrized()
        vals, vecs = eigh(sym, subset_by_index=[0, k - 1])
    else:
        sym = gen.rates.multiply(sq[:, None]).multiply(1.0 / sq[None, :]).tocsc()
        sym = (sym + sym.T) * 0.5
        try:
            vals, vecs = eigsh(sym, k=k, which="SA")
        except ArpackNoConvergence as err:
            got = err.eigenvalues.size
            resid = [
                float(np.linalg.norm(sym @ err.eigenvectors[:, i]
                                     - err.eigenvalues[i] * err.eigenvectors[:, i]))
                for i in range(got)
            ]
            raise RuntimeError(
                "eigensolver converged only %d of %d pairs; residuals %s"
                % (got, k, resid)
            ) from err
        order = np.argsort(vals)
        vals, vecs = vals[order], vecs[:, order]
    f = _fix_signs(vecs / sq[:, None])
    return EigenSystem(eigenvalues=vals, eigenvectors=f, weights=gen.weights)


def _full_decomposition(gen: GeneratorMatrix):
    if gen._full_eigh is None:
        vals, vecs = eigh(gen.symmetrized())
        gen._full_eigh = (vals, vecs)
    return gen._full_eigh


def propagate(gen: GeneratorMatrix, v: Array, tau: float) -> Array:
    """Apply the transfer operator: returns exp(-tau L*) v.

    Uses the cached full eigendecomposition of the symmetrized matrix for
    grids up to ``DENSE_LIMIT`` cells (exact and reusable), otherwise an
    adaptive ODE integration of dv/dt = -L* v at relative tolerance 1e-10.

    Parameters
    ----------
    gen : GeneratorMatrix
    v : ndarray
        Vector over the grid cells.
    tau : float
        Lag time, >= 0.
    """
    if tau < 0:
        raise ValueError("tau must be nonnegative")
    v = np.asarray(v, dtype=float)
    if v.shape != (gen.n,):
        raise ValueError("vector length %d does not match grid %d" % (v.size, gen.n))
    if tau == 0:
        return v.copy()
    if gen.n <= DENSE_LIMIT:
        vals, vecs = _full_decomposition(gen)
        sq = np.sqrt(gen.weights)
        u = vecs.T @ (sq * v)
        u *= np.exp(-tau * np.clip(vals, 0.0, None))
        return (vecs @ u) / sq
    L = gen.rates

    def rhs(_t, y):
        return -(L @ y)

    sol = solve_ivp(rhs, (0.0, tau), v, method="LSODA", rtol=1e-10, atol=1e-13)
    if not sol.success:
        raise RuntimeError("propagate ODE integration failed: %s" % sol.message)
    return sol.y[:, -1]
