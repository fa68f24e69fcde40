"""Experiment runner: config parsing, pipelines, CSV emission.

Subcommands reproduce the four rate-computation routes on the benchmark
system (idea1..idea4), the holding-time comparison (compare-mht), the
exit-time validation study (validate), and raw dumps of the generator,
eigenpairs, and memberships.  Configs are flat ``key = value`` text with
dotted sections; every default equals the benchmark parameter.  All
outputs are CSV files carrying a comment row with the config hash and
seed, and every run is byte-deterministic for a fixed config and seed,
independent of the worker count.

Exit codes: 0 success, 2 config error, 3 numerical failure (the failing
stage is named on standard error).
"""

import argparse
import dataclasses
import hashlib
import os
import sys
from dataclasses import dataclass
from typing import Dict, List, Optional

import numpy as np

from .grid_generator import RegularGrid, build_sqrt_generator
from .membership import (
    CoreSet,
    Membership,
    committor,
    find_weight_cores,
    mc_hitting_membership,
    pcca_multi,
    pcca_single,
)
from .potential import potential_by_name
from .rates import (
    chi_mean_holding_time,
    fit_survival_rate,
    gammas_to_rate,
    rate_from_eigenpair,
    regress,
    regress_generator_action,
    set_mean_holding_time,
)
from .sde import (
    SdeConfig,
    estimate_ptau_chi,
    sample_jump_exit_times,
    sample_set_exit_times,
    uniform_points,
)
from .spectral import eigensolve, propagate

#: Every known key with its benchmark default.
DEFAULTS = {
    "potential": "paper2d",
    "kbt": 1.0,
    "grid.nx": 50,
    "grid.ny": 50,
    "sde.sigma": 0.8,
    "sde.dt": 0.001,
    "sde.boundary": "clamp",
    "sde.antithetic": False,
    "eigen.k": 3,
    "membership.kind": "pcca_single",
    "membership.eigen_index": 3,
    "membership.n_clusters": 3,
    "membership.core_weight_threshold": 0.0025,
    "membership.core_box": [0.2, 0.3, 0.4, 0.5],
    "membership.n_traj": 100,
    "membership.max_steps": 100,
    "rates.norm": "ls",
    "rates.tau": 100.0,
    "idea4.n_points": 50,
    "idea4.n_traj": 100,
    "idea4.steps": 50,
    "compare.threshold": 0.22,
    "validate.threshold": 0.22,
    "validate.n_starts": 40,
    "validate.n_traj": 40,
    "validate.horizon_steps": 4000,
    "validate.jump_n_traj": 800,
    "validate.jump_horizon": 4000.0,
    "seed": 0,
    "output_dir": "out",
    "workers": 1,
}


class ConfigError(Exception):
    """Invalid configuration; maps to exit code 2."""


class StageError(Exception):
    """A pipeline stage failed; maps to exit code 3."""

    def __init__(self, stage: str, cause: Exception):
        super().__init__("stage %s: %s" % (stage, cause))
        self.stage = stage
        self.cause = cause


def _parse_scalar(text: str):
    if len(text) >= 2 and text[0] == text[-1] and text[0] in "'\"":
        return text[1:-1]
    low = text.lower()
    if low == "true":
        return True
    if low == "false":
        return False
    try:
        return int(text)
    except ValueError:
        pass
    try:
        return float(text)
    except ValueError:
        pass
    return text


def _parse_value(text: str):
    if text.startswith("[") and text.endswith("]"):
        inner = text[1:-1].strip()
        if not inner:
            return []
        return [_parse_scalar(part.strip()) for part in inner.split(",")]
    return _parse_scalar(text)


def parse_config_text(text: str) -> Dict[str, object]:
    """Parse flat ``key = value`` lines; # starts a comment."""
    data = {}
    for lineno, raw in enumerate(text.splitlines(), 1):
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        if "=" not in line:
            raise ConfigError("config line %d: expected key = value" % lineno)
        key, _, value = line.partition("=")
        key, value = key.strip(), value.strip()
        if key in data:
            raise ConfigError("config line %d: duplicate key %r" % (lineno, key))
        data[key] = _parse_value(value)
    return data


def _coerce(key: str, value, default):
    if isinstance(default, bool):
        if not isinstance(value, bool):
            raise ConfigError("key %s expects true/false" % key)
        return value
    if isinstance(default, int) and not isinstance(default, bool):
        if isinstance(value, bool) or not isinstance(value, int):
            raise ConfigError("key %s expects an integer" % key)
        return value
    if isinstance(default, float):
        if isinstance(value, bool) or not isinstance(value, (int, float)):
            raise ConfigError("key %s expects a number" % key)
        return float(value)
    if isinstance(default, list):
        if not isinstance(value, list):
            raise ConfigError("key %s expects a list like [a, b, c]" % key)
        return [float(v) for v in value]
    if not isinstance(value, str):
        raise ConfigError("key %s expects a string" % key)
    return value


@dataclass
class ExperimentConfig:
    """Effective configuration of one subcommand run."""

    experiment: str
    values: Dict[str, object]

    def __getitem__(self, key: str):
        return self.values[key]

    @property
    def seed(self) -> int:
        return int(self.values["seed"])

    @property
    def workers(self) -> int:
        return int(self.values["workers"])

    @property
    def output_dir(self) -> str:
        return str(self.values["output_dir"])

    @property
    def norm(self) -> str:
        return {"ls": "least_squares", "lad": "least_absolute"}.get(
            str(self.values["rates.norm"]), str(self.values["rates.norm"])
        )

    def config_hash(self) -> str:
        # workers and output_dir must not influence results
        parts = []
        for key in sorted(self.values):
            if key in ("workers", "output_dir"):
                continue
            value = self.values[key]
            if isinstance(value, float):
                text = repr(value)
            elif isinstance(value, list):
                text = "[" + ",".join(repr(float(v)) for v in value) + "]"
            else:
                text = str(value)
            parts.append("%s=%s" % (key, text))
        digest = hashlib.sha256("\n".join(parts).encode()).hexdigest()
        return digest[:16]

    def potential(self):
        return potential_by_name(str(self.values["potential"]))

    def grid(self) -> RegularGrid:
        nx, ny = int(self.values["grid.nx"]), int(self.values["grid.ny"])
        return RegularGrid(nx, ny, self.potential().domain)

    def sde(self) -> SdeConfig:
        return SdeConfig(
            potential=self.potential(),
            sigma=float(self.values["sde.sigma"]),
            dt=float(self.values["sde.dt"]),
            boundary=str(self.values["sde.boundary"]),
            seed=self.seed,
            antithetic=bool(self.values["sde.antithetic"]),
        )


def load_config(experiment: str, path: Optional[str], overrides: Dict[str, object]
                ) -> ExperimentConfig:
    """Merge defaults, an optional config file, and CLI overrides."""
    values = dict(DEFAULTS)
    if path is not None:
        if not os.path.exists(path):
            raise ConfigError("config file not found: %s" % path)
        with open(path) as fh:
            parsed = parse_config_text(fh.read())
        for key, value in parsed.items():
            if key == "experiment":
                if str(value) != experiment:
                    raise ConfigError(
                        "config is for experiment %r, not %r" % (value, experiment)
                    )
                continue
            if key not in DEFAULTS:
                raise ConfigError("unknown config key %r" % key)
            values[key] = _coerce(key, value, DEFAULTS[key])
    for key, value in overrides.items():
        if value is not None:
            values[key] = _coerce(key, value, DEFAULTS[key])
    if len(values["membership.core_box"]) != 4:
        raise ConfigError("membership.core_box expects [x1min,x1max,x2min,x2max]")
    if values["sde.antithetic"]:
        raise ConfigError("sde.antithetic is reserved; set it to false")
    if str(values["rates.norm"]) not in ("ls", "lad"):
        raise ConfigError("rates.norm must be ls or lad")
    return ExperimentConfig(experiment=experiment, values=values)


def _fmt(value) -> str:
    if value is None:
        return ""
    if isinstance(value, (bool, np.bool_)):
        return str(int(value))
    if isinstance(value, (float, np.floating)):
        return repr(float(value))
    if isinstance(value, (int, np.integer)):
        return str(int(value))
    return str(value)


def _write_csv(cfg: ExperimentConfig, name: str, header: List[str], rows,
               extra_comments: List[str] = ()) -> str:
    os.makedirs(cfg.output_dir, exist_ok=True)
    path = os.path.join(cfg.output_dir, name)
    with open(path, "w") as fh:
        fh.write("# config=%s seed=%d\n" % (cfg.config_hash(), cfg.seed))
        for comment in extra_comments:
            fh.write("# %s\n" % comment)
        fh.write(",".join(header) + "\n")
        for row in rows:
            fh.write(",".join(_fmt(v) for v in row) + "\n")
    return path


_REPORT_HEADER = [
    "provenance", "alpha", "beta", "eps1", "eps2", "pi_chi", "meaningful",
    "tau", "residual_norm", "n_points", "norm_kind", "note",
    "gamma1", "gamma2",
]


def _report_row(report, reg=None) -> list:
    row = report.as_row()
    out = [row[key] for key in _REPORT_HEADER[:-2]]
    if reg is None:
        out.extend(["", ""])
    else:
        out.extend([reg.gamma1, reg.gamma2])
    return out


def _write_report(cfg: ExperimentConfig, report, reg=None) -> str:
    return _write_csv(cfg, "report.csv", _REPORT_HEADER,
                      [_report_row(report, reg)])


def _write_chi(cfg: ExperimentConfig, grid: RegularGrid, values,
               name: str = "chi.csv", extra: List[str] = ()) -> str:
    centers = grid.centers
    rows = [
        (k, centers[k, 0], centers[k, 1], values[k])
        for k in range(grid.n)
    ]
    return _write_csv(cfg, name, ["cell", "x1", "x2", "chi"], rows, extra)


def _write_eigen(cfg: ExperimentConfig, grid: RegularGrid, eig,
                 name: str = "eigen.csv") -> str:
    comments = [
        "eigenvalue,%d,%s" % (i + 1, repr(float(v)))
        for i, v in enumerate(eig.eigenvalues)
    ]
    header = ["cell", "x1", "x2"] + ["f%d" % (i + 1) for i in range(eig.count)]
    centers = grid.centers
    rows = [
        [k, centers[k, 0], centers[k, 1]] + list(eig.eigenvectors[k])
        for k in range(grid.n)
    ]
    return _write_csv(cfg, name, header, rows, comments)


def _stage(name: str, fn, *args, **kwargs):
    try:
        return fn(*args, **kwargs)
    except (ConfigError, StageError):
        raise
    except Exception as err:
        raise StageError(name, err) from err


def _spectral_setup(cfg: ExperimentConfig, k: int):
    grid = _stage("grid", cfg.grid)
    gen = _stage("generator", build_sqrt_generator, cfg.potential(), grid,
                 float(cfg["kbt"]))
    eig = _stage("eigensolve", eigensolve, gen, k)
    return grid, gen, eig


def _idea1_membership(cfg: ExperimentConfig):
    which = int(cfg["membership.eigen_index"])
    grid, gen, eig = _spectral_setup(cfg, max(3, which))
    chi = _stage("pcca_single", pcca_single, eig, which)
    chi.grid = grid
    return grid, gen, eig, chi


def run_idea1(cfg: ExperimentConfig) -> int:
    """Rate from a single eigenpair: eigensolve, pcca_single, eps1."""
    grid, gen, eig, chi = _idea1_membership(cfg)
    report = _stage(
        "rates", rate_from_eigenpair,
        chi.meta["eps_bar"], chi.meta["beta_bar"], "idea1",
    )
    _write_chi(cfg, grid, chi.values)
    _write_eigen(cfg, grid, eig)
    _write_report(cfg, report)
    print(
        "idea1: eps_bar=%s pi_chi=%s eps1=%s eps2=%s meaningful=%d"
        % (repr(chi.meta["eps_bar"]), repr(report.pi_chi),
           repr(report.eps1), repr(report.eps2), int(report.meaningful))
    )
    return 0


def _select_cluster(chis, grid: RegularGrid, target: float = 0.4452):
    """The membership with weight nearest the target; ties go left."""
    dists = [abs(m.meta["weight"] - target) for m in chis]
    best = min(dists)
    tied = [m for m, d in zip(chis, dists) if d <= best + 1e-9]
    return min(
        tied, key=lambda m: grid.centers[int(np.argmax(m.values)), 0]
    )


def run_idea2(cfg: ExperimentConfig) -> int:
    """Rate by regressing the generator action of a PCCA+ membership."""
    m = int(cfg["membership.n_clusters"])
    grid, gen, eig = _spectral_setup(cfg, max(3, m))
    chis = _stage("pcca_multi", pcca_multi, eig, m)
    for c in chis:
        c.grid = grid
    chi = _select_cluster(chis, grid)
    report = _stage("rates", regress_generator_action, gen, chi, cfg.norm)
    header = ["cell", "x1", "x2"] + ["chi%d" % (j + 1) for j in range(m)]
    centers = grid.centers
    rows = [
        [k, centers[k, 0], centers[k, 1]] + [c.values[k] for c in chis]
        for k in range(grid.n)
    ]
    selected = chis.index(chi) + 1
    _write_csv(cfg, "chi.csv", header, rows,
               ["selected_cluster,%d" % selected,
                "weights," + ",".join(repr(c.meta["weight"]) for c in chis)])
    _write_report(cfg, report)
    print(
        "idea2: lambda2=%s weight=%s eps1=%s meaningful=%d"
        % (repr(float(eig.eigenvalues[1])), repr(chi.meta["weight"]),
           repr(report.eps1), int(report.meaningful))
    )
    return 0


def run_idea3(cfg: ExperimentConfig) -> int:
    """Rate from the committor: propagate, regress, invert the gammas."""
    tau = float(cfg["rates.tau"])
    if tau <= 0:
        raise ConfigError("rates.tau must be positive (no decay at tau=0)")
    grid, gen, _ = _spectral_setup(cfg, 2)
    threshold = float(cfg["membership.core_weight_threshold"])
    left, right = _stage("find_weight_cores", find_weight_cores, gen, threshold)
    chi = _stage("committor", committor, gen, left, right)
    ptau = _stage("propagate", propagate, gen, chi.values, tau)
    reg = _stage("regress", regress, chi.values, ptau, cfg.norm)
    report = _stage("rates", gammas_to_rate, reg, tau, "idea3")
    centers = grid.centers
    rows = [
        (k, centers[k, 0], centers[k, 1], chi.values[k], ptau[k])
        for k in range(grid.n)
    ]
    _write_csv(cfg, "scatter.csv", ["cell", "x1", "x2", "chi", "ptau_chi"],
               rows, ["cores,left=%d,right=%d"
                      % (left.cells.size, right.cells.size)])
    _write_report(cfg, report, reg)
    print(
        "idea3: gamma1=%s gamma2=%s eps1=%s meaningful=%d"
        % (repr(reg.gamma1), repr(reg.gamma2), repr(report.eps1),
           int(report.meaningful))
    )
    return 0


def _idea4_scatter(cfg: ExperimentConfig):
    dyn = cfg.sde()
    box = tuple(cfg["membership.core_box"])
    core = CoreSet(label="core", box=box)
    chi = _stage(
        "mc_membership", mc_hitting_membership, dyn, core,
        int(cfg["membership.n_traj"]), int(cfg["membership.max_steps"]),
        cfg.seed,
    )
    pts = _stage("sample_points", uniform_points, int(cfg["idea4.n_points"]),
                 dyn.potential.domain, cfg.seed)
    xs = _stage("chi_estimates", chi.evaluate_batch, pts, cfg.workers)
    tau = int(cfg["idea4.steps"]) * dyn.dt
    ys = _stage(
        "ptau_estimates", estimate_ptau_chi, dyn, chi, pts, tau,
        int(cfg["idea4.n_traj"]), cfg.seed, cfg.workers,
    )
    return chi, pts, xs, ys, tau


def run_idea4(cfg: ExperimentConfig) -> int:
    """Rate from short-time simulations only: MC chi and MC P^tau chi."""
    chi, pts, xs, ys, tau = _idea4_scatter(cfg)
    rows = [
        (i, pts[i, 0], pts[i, 1], xs[i], ys[i])
        for i in range(len(pts))
    ]
    _write_csv(cfg, "scatter.csv", ["point", "x1", "x2", "chi", "ptau_chi"],
               rows)
    reg = _stage("regress", regress, xs, ys, cfg.norm)
    try:
        report = gammas_to_rate(reg, tau, "idea4")
    except ValueError as err:
        # gamma1 <= 0: surface the diagnostic, keep the scatter
        print("idea4: %s" % err, file=sys.stderr)
        report = gammas_to_rate(dataclasses.replace(reg, gamma1=1.0), tau,
                                "idea4")
        report = dataclasses.replace(
            report, note="lag time too long / noise dominated")
    if report.note:
        print("idea4: %s" % report.note, file=sys.stderr)
    _write_report(cfg, report, reg)
    cost = (
        int(cfg["membership.n_traj"]) * int(cfg["membership.max_steps"])
        + int(cfg["idea4.n_traj"]) * int(cfg["idea4.steps"])
    )
    print(
        "idea4: gamma1=%s gamma2=%s eps1=%s meaningful=%d "
        "per_point_step_budget=%d"
        % (repr(reg.gamma1), repr(reg.gamma2), repr(report.eps1),
           int(report.meaningful), cost)
    )
    return 0


def run_compare_mht(cfg: ExperimentConfig) -> int:
    """Set-based versus fuzzy mean holding times on one grid."""
    grid, gen, eig, chi = _idea1_membership(cfg)
    report = rate_from_eigenpair(chi.meta["eps_bar"], chi.meta["beta_bar"],
                                 "idea1")
    threshold = float(cfg["compare.threshold"])
    mask = chi.values > threshold
    if not mask.any():
        raise StageError("region", ValueError(
            "no cells with chi > %g; empty set rejected" % threshold))
    t_set = _stage("set_mean_holding_time", set_mean_holding_time, gen, mask)
    t_fuzzy = _stage("chi_mean_holding_time", chi_mean_holding_time,
                     report, chi.values)
    centers = grid.centers
    rows = [
        (k, centers[k, 0], centers[k, 1], chi.values[k], int(mask[k]),
         t_fuzzy[k], t_set[k])
        for k in range(grid.n)
    ]
    _write_csv(cfg, "mht.csv",
               ["cell", "x1", "x2", "chi", "in_region", "t1", "t"], rows)
    high = chi.values > 0.4
    pearson = float(np.corrcoef(t_set[high], t_fuzzy[high])[0, 1])
    inside = mask
    median_diff = float(np.median(t_set[inside] - t_fuzzy[inside]))
    summary = [
        ("threshold", threshold),
        ("eps1", report.eps1),
        ("t1_at_threshold", threshold / report.eps1),
        ("n_region", int(mask.sum())),
        ("pearson_high_chi", pearson),
        ("median_t_minus_t1_inside", median_diff),
    ]
    _write_csv(cfg, "summary.csv", ["quantity", "value"], summary)
    print(
        "compare-mht: t1_at_threshold=%s pearson_high_chi=%s n_region=%d"
        % (repr(threshold / report.eps1), repr(pearson), int(mask.sum()))
    )
    return 0


def run_validate(cfg: ExperimentConfig) -> int:
    """Exit-time validation of the sampled membership.

    Realizes the idea-4 membership on the grid, samples diffusion exit
    times from S = {chi > threshold} for the (chi, mean exit time)
    correlation, and fits the exit rate of the generator's jump process
    from the deepest cell of S, reported beside the grid-propagation
    exit rate of the same membership (both live on the generator clock).
    """
    dyn = cfg.sde()
    box = tuple(cfg["membership.core_box"])
    core = CoreSet(label="core", box=box)
    chi = _stage(
        "mc_membership", mc_hitting_membership, dyn, core,
        int(cfg["membership.n_traj"]), int(cfg["membership.max_steps"]),
        cfg.seed,
    )
    grid = _stage("grid", cfg.grid)
    gen = _stage("generator", build_sqrt_generator, cfg.potential(), grid,
                 float(cfg["kbt"]))
    field = _stage("chi_field", chi.evaluate_batch, grid.centers, cfg.workers)
    threshold = float(cfg["validate.threshold"])
    mask = field > threshold
    if not mask.any():
        raise StageError("region", ValueError(
            "no cells with chi > %g; empty set rejected" % threshold))

    # spread starting cells evenly over the chi range inside S
    cells = np.nonzero(mask)[0]
    order = cells[np.argsort(field[cells], kind="stable")]
    n_starts = min(int(cfg["validate.n_starts"]), order.size)
    picks = order[np.linspace(0, order.size - 1, n_starts).astype(int)]

    def region(pts):
        return field[grid.cells_of(pts)] > threshold

    horizon = int(cfg["validate.horizon_steps"])
    n_traj = int(cfg["validate.n_traj"])
    rows = []
    means = []
    for cell in picks:
        start = grid.centers[cell]
        stats = _stage("exit_times", sample_set_exit_times, dyn, region,
                       start, n_traj, horizon, cfg.seed)
        rows.append((int(cell), start[0], start[1], field[cell],
                     stats.mean_exit_time(), stats.censoring_fraction))
        means.append(stats.mean_exit_time())
    _write_csv(cfg, "exit_times.csv",
               ["cell", "x1", "x2", "chi", "mean_exit_time",
                "censoring_fraction"], rows)
    corr = float(np.corrcoef(field[picks], np.asarray(means))[0, 1])

    # exit rate of the jump process from the deepest cell, generator clock
    deep = int(cells[np.argmax(field[cells])])
    times, censored = _stage(
        "jump_exit_times", sample_jump_exit_times, gen, mask, deep,
        int(cfg["validate.jump_n_traj"]), float(cfg["validate.jump_horizon"]),
        cfg.seed,
    )
    censor_frac = float(censored.mean())
    note = ""
    if censored.all():
        set_rate = float("nan")
        note = "all exits censored; no rate fitted"
        print("validate: %s" % note, file=sys.stderr)
    else:
        set_rate = _stage("survival_fit", fit_survival_rate, times, censored)

    # reference eps1 of the same membership on the same clock
    tau = float(cfg["rates.tau"])
    ptau = _stage("propagate", propagate, gen, np.clip(field, 0.0, 1.0), tau)
    reg = _stage("regress", regress, field, ptau, cfg.norm)
    report = _stage("rates", gammas_to_rate, reg, tau, "validate")
    ratio = set_rate / report.eps1 if np.isfinite(set_rate) else float("nan")
    summary = [
        ("threshold", threshold),
        ("n_region", int(mask.sum())),
        ("corr_chi_exit_time", corr),
        ("set_exit_rate", set_rate),
        ("eps1_grid", report.eps1),
        ("rate_ratio", ratio),
        ("jump_censoring_fraction", censor_frac),
        ("note", note),
    ]
    _write_csv(cfg, "summary.csv", ["quantity", "value"], summary)
    _write_report(cfg, report, reg)
    print(
        "validate: corr=%s set_rate=%s eps1_grid=%s ratio=%s"
        % (repr(corr), repr(set_rate), repr(report.eps1), repr(ratio))
    )
    return 0


def run_dump_generator(cfg: ExperimentConfig) -> int:
    """Write the generator matrix as (i, j, value) triplets."""
    grid = _stage("grid", cfg.grid)
    gen = _stage("generator", build_sqrt_generator, cfg.potential(), grid,
                 float(cfg["kbt"]))
    mat = gen.rates.tocoo()
    rows = list(zip(mat.row.tolist(), mat.col.tolist(), mat.data.tolist()))
    rows.sort(key=lambda r: (r[0], r[1]))
    _write_csv(cfg, "generator.csv", ["i", "j", "value"], rows)
    print("dump-generator: %d cells, %d entries" % (gen.n, len(rows)))
    return 0


def run_dump_eigen(cfg: ExperimentConfig) -> int:
    """Write the k smallest eigenpairs of the generator."""
    k = int(cfg["eigen.k"])
    grid, gen, eig = _spectral_setup(cfg, k)
    _write_eigen(cfg, grid, eig)
    print("dump-eigen: k=%d eigenvalues=%s"
          % (k, ",".join(repr(float(v)) for v in eig.eigenvalues)))
    return 0


def run_dump_chi(cfg: ExperimentConfig) -> int:
    """Write a membership of the configured kind on the grid."""
    kind = str(cfg["membership.kind"])
    if kind == "pcca_single":
        grid, gen, eig, chi = _idea1_membership(cfg)
        values = chi.values
    elif kind == "pcca_multi":
        m = int(cfg["membership.n_clusters"])
        grid, gen, eig = _spectral_setup(cfg, max(3, m))
        chis = _stage("pcca_multi", pcca_multi, eig, m)
        for c in chis:
            c.grid = grid
        values = _select_cluster(chis, grid).values
    elif kind == "committor":
        grid, gen, _ = _spectral_setup(cfg, 2)
        left, right = _stage(
            "find_weight_cores", find_weight_cores, gen,
            float(cfg["membership.core_weight_threshold"]),
        )
        values = _stage("committor", committor, gen, left, right).values
    elif kind == "mc":
        dyn = cfg.sde()
        core = CoreSet(label="core", box=tuple(cfg["membership.core_box"]))
        chi = _stage(
            "mc_membership", mc_hitting_membership, dyn, core,
            int(cfg["membership.n_traj"]), int(cfg["membership.max_steps"]),
            cfg.seed,
        )
        grid = _stage("grid", cfg.grid)
        values = _stage("chi_field", chi.evaluate_batch, grid.centers,
                        cfg.workers)
    else:
        raise ConfigError(
            "membership.kind must be pcca_single, pcca_multi, committor, "
            "or mc (got %r)" % kind
        )
    _write_chi(cfg, grid, values, extra=["kind,%s" % kind])
    print("dump-chi: kind=%s cells=%d" % (kind, grid.n))
    return 0


_COMMANDS = {
    "idea1": run_idea1,
    "idea2": run_idea2,
    "idea3": run_idea3,
    "idea4": run_idea4,
    "compare-mht": run_compare_mht,
    "validate": run_validate,
    "dump-generator": run_dump_generator,
    "dump-eigen": run_dump_eigen,
    "dump-chi": run_dump_chi,
}


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="chi-exit",
        description="Exit rates of rare events from fuzzy metastable sets.",
    )
    sub = parser.add_subparsers(dest="command", required=True)
    for name, fn in _COMMANDS.items():
        p = sub.add_parser(name, help=(fn.__doc__ or name).splitlines()[0])
        p.add_argument("--config", default=None, help="config file path")
        p.add_argument("--seed", type=int, default=None, help="master seed")
        p.add_argument("--out", default=None, help="output directory")
        p.add_argument("--workers", type=int, default=None,
                       help="worker processes (never changes results)")
        p.add_argument("--norm", choices=("ls", "lad"), default=None,
                       help="regression norm")
    return parser


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    try:
        cfg = load_config(
            args.command, args.config,
            {
                "seed": args.seed,
                "output_dir": args.out,
                "workers": args.workers,
                "rates.norm": args.norm,
            },
        )
        return _COMMANDS[args.command](cfg)
    except ConfigError as err:
        print("config error: %s" % err, file=sys.stderr)
        return 2
    except StageError as err:
        print(str(err), file=sys.stderr)
        return 3


if __name__ == "__main__":
    sys.exit(main())
