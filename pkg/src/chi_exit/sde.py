"""Euler-Maruyama sampling and Monte Carlo estimators.

Implements the overdamped Langevin dynamics dX = -grad V dt + sigma dB
with boundary clamping, trajectory ensembles for hitting and exit
statistics, the Monte Carlo estimator of P^tau chi, and both backends of
the Feynman-Kac chi-holding probability.

Every ensemble draws from a counter-based stream keyed by the master
seed, a role tag, and the starting point, so results are reproducible
and independent of evaluation order and worker count.  Rate-magnitude
comparisons against generator quantities use the generator's own jump
process (``sample_jump_exit_times``, ``feynman_kac_holding`` MC backend)
because the grid operator carries its own time unit.
"""

import math
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass
from typing import Callable, Optional, Tuple

import numpy as np
import scipy.sparse as sp
from scipy.integrate import solve_ivp

from .grid_generator import GeneratorMatrix
from .potential import PotentialSurface, potential_by_name
from .streams import (
    TAG_CHI,
    TAG_EXIT,
    TAG_FK,
    TAG_JUMP,
    TAG_POINTS,
    TAG_PTAU,
    generator_for,
)

Array = np.ndarray

#: Memberships below this value carry an infinite occupation penalty.
CHI_MIN = 1e-6

#: Points per worker task; fixed so results do not depend on worker count.
_CHUNK = 64


@dataclass(frozen=True)
class SdeConfig:
    """Overdamped Langevin dynamics dX = -grad V dt + sigma dB.

    Attributes
    ----------
    potential : PotentialSurface
        Drift potential; its domain bounds the trajectories.
    sigma : float
        Constant diffusion parameter, >= 0.
    dt : float
        Time step of the Euler-Maruyama scheme.
    boundary : str
        Only "clamp" is supported: steps leaving the domain are clamped
        to the boundary, mirroring the no-flux grid generator.
    seed : int
        Master seed for all streams derived from this configuration.
    antithetic : bool
        Reserved; must stay False (plain Monte Carlo).
    """

    potential: PotentialSurface
    sigma: float = 0.8
    dt: float = 1e-3
    boundary: str = "clamp"
    seed: int = 0
    antithetic: bool = False

    def __post_init__(self):
        if not np.isfinite(self.sigma) or self.sigma < 0:
            raise ValueError("sigma must be finite and >= 0")
        if not np.isfinite(self.dt) or self.dt <= 0:
            raise ValueError("dt must be finite and positive")
        if self.boundary != "clamp":
            raise ValueError("unsupported boundary handling %r" % (self.boundary,))
        if self.antithetic:
            raise ValueError("antithetic variates are reserved, set antithetic=false")

    @property
    def bounds(self) -> Tuple[Array, Array]:
        (lo1, lo2), (hi1, hi2) = self.potential.domain
        return np.array([lo1, lo2]), np.array([hi1, hi2])


@dataclass
class TrajectoryStats:
    """Hitting/exit statistics of one trajectory ensemble.

    Attributes
    ----------
    start : ndarray, shape (2,)
        Common starting position.
    endpoints : ndarray, shape (n_traj, 2)
        Positions at the horizon.
    hit_steps : ndarray of int
        First step entering the core, -1 when never hit.
    exit_steps : ndarray of int
        First step leaving the set, -1 when censored at the horizon.
    horizon_steps : int
        Number of integration steps simulated.
    dt : float
        Time step, for converting steps to times.
    """

    start: Array
    endpoints: Array
    hit_steps: Array
    exit_steps: Array
    horizon_steps: int
    dt: float

    @property
    def n_traj(self) -> int:
        return self.endpoints.shape[0]

    @property
    def censoring_fraction(self) -> float:
        return float(np.mean(self.exit_steps < 0))

    def mean_exit_time(self) -> float:
        """Censored-sample mean exit time (censored entries count as the
        horizon, so this underestimates when censoring_fraction > 0)."""
        steps = np.where(self.exit_steps < 0, self.horizon_steps, self.exit_steps)
        return float(steps.mean() * self.dt)


def step(config: SdeConfig, x, noise) -> Array:
    """One Euler-Maruyama step x - grad V(x) dt + sigma sqrt(dt) noise.

    Parameters
    ----------
    config : SdeConfig
    x : array-like, shape (2,)
        Current position, inside the domain.
    noise : array-like, shape (2,)
        A standard normal draw.

    Returns
    -------
    ndarray, shape (2,)
        The next position, clamped to the domain.
    """
    x = np.asarray(x, dtype=float)
    noise = np.asarray(noise, dtype=float)
    g = config.potential.grad(x)
    if not np.all(np.isfinite(g)):
        raise ValueError(
            "non-finite gradient at (%g, %g); trajectory aborted" % (x[0], x[1])
        )
    lo, hi = config.bounds
    out = x - g * config.dt + config.sigma * math.sqrt(config.dt) * noise
    return np.clip(out, lo, hi)


def _advance(potential, sigma, dt, lo, hi, pos, noise):
    """Vectorized Euler-Maruyama step with clamping, shape-preserving."""
    g = potential.grad(pos)
    if not np.all(np.isfinite(g)):
        bad = np.asarray(pos).reshape(-1, 2)[
            ~np.isfinite(g).reshape(-1, 2).all(axis=1)
        ][0]
        raise ValueError(
            "non-finite gradient at (%g, %g); trajectory aborted" % (bad[0], bad[1])
        )
    out = pos - g * dt + (sigma * math.sqrt(dt)) * noise
    np.clip(out, lo, hi, out=out)
    return out


def _resolve_potential(spec):
    if isinstance(spec, PotentialSurface):
        return spec
    return potential_by_name(spec)


def _in_box(pos: Array, box) -> Array:
    x1lo, x1hi, x2lo, x2hi = box
    x1, x2 = pos[..., 0], pos[..., 1]
    return (x1 >= x1lo) & (x1 <= x1hi) & (x2 >= x2lo) & (x2 <= x2hi)


def _hit_chunk(args):
    (pspec, sigma, dt, domain, box, pts, n_traj, max_steps, seed) = args
    potential = _resolve_potential(pspec)
    lo, hi = np.array(domain[0]), np.array(domain[1])
    pts = np.asarray(pts, dtype=float)
    rngs = [generator_for(seed, TAG_CHI, p) for p in pts]
    pos = np.repeat(pts[:, None, :], n_traj, axis=1)
    hit = _in_box(pos, box)  # the start itself counts as step 0
    alive = np.nonzero(~hit.all(axis=1))[0]
    for _ in range(max_steps):
        if alive.size == 0:
            break
        noise = np.empty((alive.size, n_traj, 2))
        for r, i in enumerate(alive):
            # one block of draws per still-running point and step, so the
            # stream consumption never depends on other points
            noise[r] = rngs[i].standard_normal((n_traj, 2))
        moved = _advance(potential, sigma, dt, lo, hi, pos[alive], noise)
        pos[alive] = moved
        hit[alive] |= _in_box(moved, box)
        alive = alive[~hit[alive].all(axis=1)]
    return hit.mean(axis=1)


def _endpoint_chunk(args):
    (pspec, sigma, dt, domain, pts, steps, n_traj, seed, tag) = args
    potential = _resolve_potential(pspec)
    lo, hi = np.array(domain[0]), np.array(domain[1])
    pts = np.asarray(pts, dtype=float)
    rngs = [generator_for(seed, tag, p) for p in pts]
    pos = np.repeat(pts[:, None, :], n_traj, axis=1)
    for _ in range(steps):
        noise = np.empty_like(pos)
        for r in range(len(pts)):
            noise[r] = rngs[r].standard_normal((n_traj, 2))
        pos = _advance(potential, sigma, dt, lo, hi, pos, noise)
    return pos


def _map_chunks(fn, tasks, workers: int):
    if workers <= 1 or len(tasks) <= 1:
        return [fn(t) for t in tasks]
    with ProcessPoolExecutor(max_workers=min(workers, len(tasks))) as pool:
        return list(pool.map(fn, tasks))


def hitting_fractions(config: SdeConfig, box, points, n_traj: int,
                      max_steps: int, seed: Optional[int] = None,
                      workers: int = 1) -> Array:
    """Fraction of trajectories from each point entering a box core.

    Parameters
    ----------
    config : SdeConfig
    box : tuple
        (x1_min, x1_max, x2_min, x2_max) hitting target.
    points : ndarray, shape (m, 2)
        Starting positions.
    n_traj, max_steps : int
        Ensemble size and step budget per point.
    seed : int, optional
        Defaults to config.seed.
    workers : int
        Worker processes; does not affect the values.

    Returns
    -------
    ndarray, shape (m,)
        Hitting fractions in [0, 1].
    """
    if n_traj < 1 or max_steps < 1:
        raise ValueError("n_traj and max_steps must be >= 1")
    points = np.atleast_2d(np.asarray(points, dtype=float))
    seed = config.seed if seed is None else seed
    registered = config.potential.name in ("paper2d", "flat")
    pspec = config.potential.name if registered else config.potential
    if not registered:
        workers = 1  # unregistered surfaces may not survive pickling
    tasks = [
        (pspec, config.sigma, config.dt, config.potential.domain,
         tuple(box), points[i:i + _CHUNK], int(n_traj), int(max_steps),
         int(seed))
        for i in range(0, len(points), _CHUNK)
    ]
    parts = _map_chunks(_hit_chunk, tasks, workers)
    return np.concatenate(parts)


def endpoint_ensemble(config: SdeConfig, points, steps: int, n_traj: int,
                      seed: Optional[int] = None, tag: int = TAG_PTAU,
                      workers: int = 1) -> Array:
    """Endpoints after ``steps`` integration steps, per point and trajectory.

    Returns
    -------
    ndarray, shape (m, n_traj, 2)
    """
    if n_traj < 1 or steps < 0:
        raise ValueError("n_traj must be >= 1 and steps >= 0")
    points = np.atleast_2d(np.asarray(points, dtype=float))
    seed = config.seed if seed is None else seed
    if steps == 0:
        return np.repeat(points[:, None, :], n_traj, axis=1)
    registered = config.potential.name in ("paper2d", "flat")
    pspec = config.potential.name if registered else config.potential
    if not registered:
        workers = 1
    tasks = [
        (pspec, config.sigma, config.dt, config.potential.domain,
         points[i:i + _CHUNK], int(steps), int(n_traj), int(seed), int(tag))
        for i in range(0, len(points), _CHUNK)
    ]
    parts = _map_chunks(_endpoint_chunk, tasks, workers)
    return np.concatenate(parts, axis=0)


def uniform_points(n: int, domain, seed: int) -> Array:
    """n uniform points in the box domain from the master-seed stream."""
    (lo1, lo2), (hi1, hi2) = domain
    rng = generator_for(seed, TAG_POINTS)
    return rng.uniform((lo1, lo2), (hi1, hi2), size=(int(n), 2))


def _evaluate_chi(chi, pts: Array, workers: int = 1) -> Array:
    """Evaluate a membership (grid vector, point sampler, or callable)."""
    kind = getattr(chi, "kind", None)
    if kind == "grid_vector":
        cells = chi.grid.cells_of(pts)
        return chi.values[cells]
    if kind == "point_sampler":
        return chi.evaluate_batch(pts, workers=workers)
    vals = chi(pts)
    return np.asarray(vals, dtype=float)


def _steps_for(tau: float, dt: float) -> int:
    if tau < 0:
        raise ValueError("tau must be nonnegative")
    steps = int(round(tau / dt))
    if abs(steps * dt - tau) > 1e-9 or (tau > 0 and steps == 0):
        raise ValueError(
            "tau=%g is not a multiple of dt=%g within 1e-9" % (tau, dt)
        )
    return steps


def estimate_ptau_chi(config: SdeConfig, chi, x, tau: float, n_traj: int,
                      seed: Optional[int] = None, workers: int = 1):
    """Monte Carlo estimate of (P^tau chi)(x).

    Starts ``n_traj`` trajectories of time-length tau at x and averages
    chi over their endpoints.  When chi itself is a point sampler, the
    endpoint evaluations spawn the sampler's own ensembles, composing the
    two sampling layers.

    Parameters
    ----------
    config : SdeConfig
    chi : Membership or callable
        Evaluated at the endpoint positions.
    x : array-like
        One position (2,) or a batch (m, 2).
    tau : float
        Lag time; a nonnegative multiple of dt (within 1e-9).  tau=0
        returns chi(x) exactly.
    n_traj : int
        Trajectories per point.
    seed : int, optional
        Defaults to config.seed.
    workers : int
        Worker processes; does not affect the values.

    Returns
    -------
    float or ndarray
        Estimates in [0, 1]; scalar for a single position.
    """
    x = np.asarray(x, dtype=float)
    single = x.ndim == 1
    pts = np.atleast_2d(x)
    steps = _steps_for(tau, config.dt)
    if steps == 0:
        vals = _evaluate_chi(chi, pts, workers)
        return float(vals[0]) if single else vals
    ends = endpoint_ensemble(config, pts, steps, n_traj, seed=seed,
                             tag=TAG_PTAU, workers=workers)
    vals = _evaluate_chi(chi, ends.reshape(-1, 2), workers)
    means = vals.reshape(len(pts), n_traj).mean(axis=1)
    return float(means[0]) if single else means


def _chi_vector(chi, gen: GeneratorMatrix) -> Array:
    kind = getattr(chi, "kind", None)
    if kind == "grid_vector":
        vals = chi.values
    elif kind == "point_sampler":
        raise ValueError("feynman_kac_holding needs a grid membership")
    else:
        vals = np.asarray(chi, dtype=float)
    if vals.shape != (gen.n,):
        raise ValueError("membership does not match the generator grid")
    return vals


def _fk_grid(gen: GeneratorMatrix, chi: Array, eps2: float, t: float) -> Array:
    """Stiff ODE integration of dp/dt = -L* p - eps2 (1-chi)/chi p."""
    if t == 0:
        return chi.copy()
    alive = chi >= CHI_MIN
    sub = gen.rates[alive][:, alive].tocsc()
    pen = eps2 * (1.0 - chi[alive]) / chi[alive]
    op = (-(sub + sp.diags(pen))).tocsc()

    def rhs(_t, y):
        return op @ y

    sol = solve_ivp(rhs, (0.0, float(t)), chi[alive], method="BDF",
                    jac=op, rtol=1e-10, atol=1e-14)
    if not sol.success:
        raise RuntimeError("holding-probability ODE failed: %s" % sol.message)
    out = np.zeros(gen.n)
    out[alive] = sol.y[:, -1]
    return out


def _fk_mc_cell(gen: GeneratorMatrix, chi: Array, eps2: float, cell: int,
                t: float, n_traj: int, seed: int) -> Tuple[float, float]:
    """Jump-process Feynman-Kac average started from one cell."""
    if chi[cell] < CHI_MIN:
        return 0.0, 0.0
    rate_out, neighbors, cum = gen.jump_tables()
    pen = np.where(chi >= CHI_MIN, (1.0 - chi) / np.maximum(chi, CHI_MIN), np.inf)
    rng = generator_for(seed, TAG_FK, int(cell))
    cells = np.full(n_traj, cell, dtype=np.int64)
    clock = np.zeros(n_traj)
    integral = np.zeros(n_traj)
    weight_dead = np.zeros(n_traj, dtype=bool)
    active = np.ones(n_traj, dtype=bool)
    while active.any():
        idx = np.nonzero(active)[0]
        hold = rng.exponential(size=idx.size) / rate_out[cells[idx]]
        finish = clock[idx] + hold >= t
        fin, go = idx[finish], idx[~finish]
        integral[fin] += (t - clock[fin]) * pen[cells[fin]]
        clock[fin] = t
        active[fin] = False
        if go.size:
            integral[go] += hold[~finish] * pen[cells[go]]
            clock[go] += hold[~finish]
            u = rng.random(go.size)
            pick = (u[:, None] > cum[cells[go]]).sum(axis=1)
            nxt = neighbors[cells[go], pick]
            cells[go] = nxt
            died = chi[nxt] < CHI_MIN
            weight_dead[go[died]] = True
            active[go[died]] = False
    values = np.where(weight_dead, 0.0,
                      chi[cells] * np.exp(-eps2 * integral))
    est = float(values.mean())
    se = float(values.std(ddof=1) / math.sqrt(n_traj)) if n_traj > 1 else 0.0
    return est, se


def feynman_kac_holding(config_or_gen, chi, eps2: float, x=None, t: float = 0.0,
                        n_traj: int = 1000, seed: Optional[int] = None,
                        backend: str = "grid"):
    """Chi-holding probability p_chi(x, t) by either backend.

    The grid backend integrates dp/dt = -L* p - eps2 (1-chi)/chi p from
    p(0) = chi with a stiff adaptive integrator and returns the whole
    vector (or the entry at x).  The MC backend averages
    chi(X_t) exp(-eps2 * integral (1-chi)/chi) over trajectories of the
    jump process generated by L*, which shares the grid operator's time
    unit; states with chi below ``CHI_MIN`` carry an infinite penalty and
    zero out the trajectory.

    Parameters
    ----------
    config_or_gen : GeneratorMatrix
        The grid operator (both backends run on its clock).
    chi : Membership or ndarray
        Grid membership values.
    eps2 : float
        Penalty rate, >= 0.
    x : position, int cell, array of cells, or None
        None returns the whole vector (grid backend only).
    t : float
        Horizon, >= 0.
    n_traj : int
        MC ensemble size per cell.
    seed : int, optional
        Master seed for the MC backend (default 0).
    backend : str
        "grid" or "mc".

    Returns
    -------
    ndarray or float
        Grid backend: vector over cells, or the value at x.
        MC backend: (estimate, stderr) pair, vectorized over cells.
    """
    if not isinstance(config_or_gen, GeneratorMatrix):
        raise TypeError(
            "feynman_kac_holding needs the GeneratorMatrix; both backends "
            "run on the grid operator's time unit"
        )
    gen = config_or_gen
    if eps2 < 0:
        raise ValueError("eps2 must be nonnegative")
    if t < 0:
        raise ValueError("t must be nonnegative")
    vals = _chi_vector(chi, gen)

    # integers denote cells, float pairs denote positions
    if x is None:
        cells = None
    else:
        arr = np.asarray(x)
        if arr.dtype.kind in "iu":
            cells = np.atleast_1d(arr).astype(np.int64).ravel()
        elif arr.shape == (2,):
            cells = np.array([gen.grid.cell_of(arr.astype(float))])
        else:
            cells = gen.grid.cells_of(np.atleast_2d(arr.astype(float)))
    if backend == "grid":
        p = _fk_grid(gen, vals, eps2, t)
        if cells is None:
            return p
        out = p[cells]
        return float(out[0]) if out.size == 1 else out
    if backend != "mc":
        raise ValueError("backend must be 'grid' or 'mc'")
    if cells is None:
        raise ValueError("mc backend needs starting cells or positions")
    seed = 0 if seed is None else seed
    if t == 0:
        ests = vals[cells].copy()
        ses = np.zeros_like(ests)
    else:
        pairs = [_fk_mc_cell(gen, vals, eps2, int(c), t, int(n_traj), int(seed))
                 for c in cells]
        ests = np.array([p[0] for p in pairs])
        ses = np.array([p[1] for p in pairs])
    if ests.size == 1:
        return float(ests[0]), float(ses[0])
    return ests, ses


def sample_set_exit_times(config: SdeConfig, region: Callable[[Array], Array],
                          x, n_traj: int, horizon_steps: int,
                          seed: Optional[int] = None) -> TrajectoryStats:
    """First-exit steps from a region, censored at the horizon.

    Parameters
    ----------
    config : SdeConfig
    region : callable
        Predicate mapping positions of shape (m, 2) to booleans; True
        means inside the set.
    x : array-like, shape (2,)
        Starting position, inside the region.
    n_traj : int
        Ensemble size.
    horizon_steps : int
        Step budget; trajectories still inside are censored.
    seed : int, optional
        Defaults to config.seed.

    Returns
    -------
    TrajectoryStats
        exit_steps holds the first step outside the region (-1 when
        censored); endpoints are the positions at the horizon.
    """
    x = np.asarray(x, dtype=float)
    if not bool(np.all(region(x[None, :]))):
        raise ValueError("starting position lies outside the region")
    if n_traj < 1 or horizon_steps < 1:
        raise ValueError("n_traj and horizon_steps must be >= 1")
    seed = config.seed if seed is None else seed
    rng = generator_for(seed, TAG_EXIT, x)
    lo, hi = config.bounds
    pos = np.repeat(x[None, :], n_traj, axis=0)
    exit_steps = np.full(n_traj, -1, dtype=np.int64)
    inside = np.ones(n_traj, dtype=bool)
    for s in range(1, horizon_steps + 1):
        noise = rng.standard_normal((n_traj, 2))
        pos = _advance(config.potential, config.sigma, config.dt, lo, hi,
                       pos, noise)
        now_out = inside & ~np.asarray(region(pos), dtype=bool)
        exit_steps[now_out] = s
        inside &= ~now_out
    return TrajectoryStats(start=x, endpoints=pos, hit_steps=np.full(n_traj, -1, dtype=np.int64),
                           exit_steps=exit_steps, horizon_steps=int(horizon_steps),
                           dt=config.dt)


def sample_jump_exit_times(gen: GeneratorMatrix, region_cells, start_cell: int,
                           n_traj: int, horizon_time: float,
                           seed: int = 0) -> Tuple[Array, Array]:
    """First-exit times of the generator's jump process from a cell set.

    The jump process holds in cell i for an exponential time with rate
    L*_ii and then moves to a neighbor with probability proportional to
    the off-diagonal rate, so its exit times live on the same clock as
    the generator's rates.

    Parameters
    ----------
    gen : GeneratorMatrix
    region_cells : boolean mask (n,) or index array
        The set S; True/included means inside.
    start_cell : int
        Starting cell, inside S.
    n_traj : int
        Ensemble size.
    horizon_time : float
        Censoring horizon on the generator clock.
    seed : int
        Master seed.

    Returns
    -------
    times : ndarray
        Exit times; censored entries equal horizon_time.
    censored : ndarray of bool
        True where no exit occurred before the horizon.
    """
    mask = np.zeros(gen.n, dtype=bool)
    region_cells = np.asarray(region_cells)
    if region_cells.dtype == bool:
        mask[:] = region_cells
    else:
        mask[region_cells.astype(np.int64)] = True
    if not mask[start_cell]:
        raise ValueError("start cell lies outside the region")
    if n_traj < 1 or horizon_time <= 0:
        raise ValueError("n_traj must be >= 1 and horizon_time positive")
    rate_out, neighbors, cum = gen.jump_tables()
    rng = generator_for(seed, TAG_JUMP, int(start_cell))
    cells = np.full(n_traj, start_cell, dtype=np.int64)
    clock = np.zeros(n_traj)
    times = np.full(n_traj, float(horizon_time))
    censored = np.ones(n_traj, dtype=bool)
    active = np.ones(n_traj, dtype=bool)
    while active.any():
        idx = np.nonzero(active)[0]
        hold = rng.exponential(size=idx.size) / rate_out[cells[idx]]
        clock[idx] += hold
        timed_out = clock[idx] >= horizon_time
        active[idx[timed_out]] = False
        go = idx[~timed_out]
        if go.size:
            u = rng.random(go.size)
            pick = (u[:, None] > cum[cells[go]]).sum(axis=1)
            nxt = neighbors[cells[go], pick]
            cells[go] = nxt
            left = ~mask[nxt]
            out = go[left]
            times[out] = clock[out]
            censored[out] = False
            active[out] = False
    return times, censored
