"""
Command-line experiment runner.

Every scenario produces a table of rows written as CSV (with a ``# schema=1``
comment line) or JSON. Output depends only on the configuration and the seed.
Exit codes: 0 on success, 1 when a check fails, 2 on bad input or an engine
error.
"""

import argparse
import csv
import io
import json
import math
import sys
from concurrent.futures import ThreadPoolExecutor
from dataclasses import asdict, dataclass, fields

import numpy as np

from .detector import average_sep, optimal_boundaries, per_symbol_error
from .errors import EnergySimoError
from .model import SystemParams, energy_stats, validate_constellation
from .optimizer import DEFAULT_EPSILON, brute_force, convexity_probe, optimize
from .simulator import gaussianity_report, simulate_ser

SCHEMA = 1
SCENARIOS = ("optimize", "sep", "simulate", "brute-force", "sweep-n",
             "sweep-m", "sweep-snr", "gaussianity", "convexity", "validate")
CHECKS = ("brute-force", "convergence", "simulate", "gaussianity",
          "convexity")

# trials used when none are given
_DEFAULT_TRIALS = {"simulate": 100_000, "validate": 100_000,
                   "gaussianity": 100_000, "convexity": 10_000}


class ConfigError(EnergySimoError, ValueError):
    pass


@dataclass(frozen=True)
class ExperimentConfig:
    scenario: str
    K: float = 50.0
    N: int = 500
    M: int = 4
    snr_db: float = 0.0
    sigma_z2: float = 1.0
    epsilon: float = DEFAULT_EPSILON
    trials: int | None = None
    seed: int = 42
    out: str | None = None
    format: str = "csv"
    powers: tuple | None = None
    ns: tuple = tuple(range(100, 1001, 100))
    ms: tuple = tuple(range(2, 11))
    snrs: tuple = tuple(float(s) for s in range(-6, 7))
    ks: tuple | None = None
    grid_step: float = 0.01
    workers: int = 1
    checks: tuple = CHECKS

    def __post_init__(self):
        if self.scenario not in SCENARIOS:
            raise ConfigError(f"unknown scenario {self.scenario!r}")
        if self.format not in ("csv", "json"):
            raise ConfigError(f"format must be csv or json, got {self.format!r}")
        for name in ("ns", "ms", "snrs", "checks"):
            if not getattr(self, name):
                raise ConfigError(f"{name} must not be empty")
        if self.ks is not None and not self.ks:
            raise ConfigError("ks must not be empty")
        if any(n < 1 for n in self.ns) or any(m < 2 for m in self.ms):
            raise ConfigError("N values must be >= 1 and M values >= 2")
        bad = set(self.checks) - set(CHECKS)
        if bad:
            raise ConfigError(f"unknown checks: {sorted(bad)}")
        if self.trials is not None and self.trials < 0:
            raise ConfigError("trials must be >= 0")
        if self.workers < 1:
            raise ConfigError("workers must be >= 1")

    @property
    def n_trials(self) -> int:
        if self.trials is not None:
            return self.trials
        return _DEFAULT_TRIALS.get(self.scenario, 0)

    @property
    def k_values(self) -> tuple:
        return self.ks if self.ks is not None else (self.K,)

    def params(self, **changes) -> SystemParams:
        kw = dict(K=self.K, N=self.N, M=self.M, snr_db=self.snr_db,
                  sigma_z2=self.sigma_z2)
        kw.update(changes)
        return SystemParams.from_snr_db(**kw)


# -- config parsing ------------------------------------------------------------

def _floats(s):
    return tuple(float(v) for v in str(s).split(",") if v.strip())


def _ints(s):
    return tuple(int(v) for v in str(s).split(",") if v.strip())


def _names(s):
    return tuple(v.strip() for v in str(s).split(",") if v.strip())


_CONVERT = {
    "K": float, "N": int, "M": int, "snr_db": float, "sigma_z2": float,
    "epsilon": float, "trials": int, "seed": int, "out": str, "format": str,
    "powers": _floats, "ns": _ints, "ms": _ints, "snrs": _floats,
    "ks": _floats, "grid_step": float, "workers": int, "checks": _names,
}
_ALIASES = {"k": "K", "n": "N", "m": "M"}


def read_config_file(path) -> dict:
    """Parse a flat ``key = value`` file; ``#`` starts a comment."""
    values = {}
    with open(path, encoding="utf-8") as fh:
        for lineno, raw in enumerate(fh, start=1):
            line = raw.split("#", 1)[0].strip()
            if not line:
                continue
            if "=" not in line:
                raise ConfigError(f"{path}:{lineno}: expected key=value")
            key, val = (s.strip() for s in line.split("=", 1))
            key = key.replace("-", "_")
            key = _ALIASES.get(key, key)
            if key not in _CONVERT:
                raise ConfigError(f"{path}:{lineno}: unknown key {key!r}")
            try:
                values[key] = _CONVERT[key](val)
            except ValueError as exc:
                raise ConfigError(f"{path}:{lineno}: {exc}") from None
    return values


def build_parser() -> argparse.ArgumentParser:
    common = argparse.ArgumentParser(add_help=False)
    # defaults are None so that file values are only overridden by real flags
    common.add_argument("--K", type=float, help="Rician K-factor")
    common.add_argument("--N", type=int, help="receive antennas")
    common.add_argument("--M", type=int, help="constellation size")
    common.add_argument("--snr-db", dest="snr_db", type=float)
    common.add_argument("--sigma-z2", dest="sigma_z2", type=float,
                        help="noise variance (default 1.0)")
    common.add_argument("--epsilon", type=float,
                        help="stopping tolerance (default 1e-6)")
    common.add_argument("--trials", type=int,
                        help="Monte Carlo trials per symbol or probe trials")
    common.add_argument("--seed", type=int, help="default 42")
    common.add_argument("--out", help="output file (default stdout)")
    common.add_argument("--format", choices=("csv", "json"))
    common.add_argument("--config", help="flat key=value file")
    common.add_argument("--powers", type=_floats,
                        help="comma-separated constellation powers")
    common.add_argument("--ns", type=_ints, help="N values for sweep-n")
    common.add_argument("--ms", type=_ints, help="M values for sweep-m")
    common.add_argument("--snrs", type=_floats,
                        help="SNR values in dB for sweep-snr; write "
                             "--snrs=-6,-3 when the list starts negative")
    common.add_argument("--ks", type=_floats,
                        help="K values for sweeps (default: --K)")
    common.add_argument("--grid-step", dest="grid_step", type=float)
    common.add_argument("--workers", type=int,
                        help="threads for sweeps and Monte Carlo blocks")
    common.add_argument("--checks", type=_names,
                        help="subset of validate checks: " + ",".join(CHECKS))

    parser = argparse.ArgumentParser(
        prog="energysimo",
        description="Design and evaluate energy-detection constellations.")
    sub = parser.add_subparsers(dest="scenario", required=True)
    helps = {
        "optimize": "alternating optimisation of powers and thresholds",
        "sep": "error probability of a given constellation",
        "simulate": "Monte Carlo symbol error rate",
        "brute-force": "exhaustive grid search over power allocations",
        "sweep-n": "optimised error probability versus N",
        "sweep-m": "optimised error probability versus M",
        "sweep-snr": "optimised error probability versus SNR",
        "gaussianity": "check the Gaussian model of the receive energy",
        "convexity": "random convex-combination probe",
        "validate": "run the cross-checks and report pass/fail",
    }
    for name in SCENARIOS:
        sub.add_parser(name, parents=[common], help=helps[name])
    return parser


def resolve_config(argv=None) -> ExperimentConfig:
    """Merge defaults, config file and flags (flags win)."""
    ns = build_parser().parse_args(argv)
    values = {}
    if ns.config:
        values.update(read_config_file(ns.config))
    for f in fields(ExperimentConfig):
        v = getattr(ns, f.name, None)
        if v is not None and f.name != "scenario":
            values[f.name] = v
    return ExperimentConfig(scenario=ns.scenario, **values)


# -- output --------------------------------------------------------------------

def _fmt(v) -> str:
    if v is None:
        return ""
    if isinstance(v, (bool, np.bool_)):
        return "true" if v else "false"
    if isinstance(v, (int, np.integer)):
        return str(int(v))
    if isinstance(v, (float, np.floating)):
        return format(float(v), ".17g")
    return str(v)


def _json_value(v):
    if isinstance(v, (bool, np.bool_)):
        return bool(v)
    if isinstance(v, (int, np.integer)):
        return int(v)
    if isinstance(v, (float, np.floating)):
        v = float(v)
        return v if math.isfinite(v) else _fmt(v)
    return v


def render(rows, columns, cfg: ExperimentConfig) -> str:
    if cfg.format == "json":
        # the output path and thread count do not affect results
        doc = {
            "schema": SCHEMA,
            "scenario": cfg.scenario,
            "config": {k: (list(v) if isinstance(v, tuple) else v)
                       for k, v in asdict(cfg).items()
                       if k not in ("out", "workers")},
            "columns": list(columns),
            "rows": [{c: _json_value(r.get(c)) for c in columns}
                     for r in rows],
        }
        return json.dumps(doc, indent=2) + "\n"
    buf = io.StringIO()
    buf.write(f"# schema={SCHEMA}\n")
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(columns)
    for r in rows:
        w.writerow([_fmt(r.get(c)) for c in columns])
    return buf.getvalue()


def _emit(text: str, cfg: ExperimentConfig):
    if cfg.out:
        with open(cfg.out, "w", encoding="utf-8", newline="") as fh:
            fh.write(text)
    else:
        sys.stdout.write(text)


# -- scenarios -----------------------------------------------------------------

OPT_COLUMNS = ("symbol_index", "p_m", "alpha_m", "lambda_m", "P_e",
               "iterations", "converged")


def _constellation_rows(res):
    c, lam = res.constellation, res.boundaries.lambdas
    return [{"symbol_index": m, "p_m": c.powers[m - 1],
             "alpha_m": c.alpha[m - 1],
             "lambda_m": lam[m - 1] if m < c.M else None,
             "P_e": res.sep, "iterations": res.iterations,
             "converged": res.converged} for m in range(1, c.M + 1)]


def run_optimize(cfg):
    res = optimize(cfg.params(), epsilon=cfg.epsilon)
    return _constellation_rows(res), OPT_COLUMNS


def run_brute_force(cfg):
    res = brute_force(cfg.params(), grid_step=cfg.grid_step)
    return _constellation_rows(res), OPT_COLUMNS


def _given_or_optimal(cfg, params):
    if cfg.powers is not None:
        c = validate_constellation(cfg.powers, params)
        return c, optimal_boundaries(c, params)
    res = optimize(params, epsilon=cfg.epsilon)
    return res.constellation, res.boundaries


def run_sep(cfg):
    pr = cfg.params()
    c, b = _given_or_optimal(cfg, pr)
    total = average_sep(c, b, pr)
    rows = []
    for m in range(1, c.M + 1):
        st = energy_stats(pr, float(c.powers[m - 1]))
        rows.append({"symbol_index": m, "p_m": c.powers[m - 1],
                     "mu_m": st.mu, "sigma2_m": st.sigma2,
                     "lambda_m": b.lambdas[m - 1] if m < c.M else None,
                     "P_e_m": per_symbol_error(m, c, b, pr), "P_e": total})
    return rows, ("symbol_index", "p_m", "mu_m", "sigma2_m", "lambda_m",
                  "P_e_m", "P_e")


def run_simulate(cfg):
    pr = cfg.params()
    c, b = _given_or_optimal(cfg, pr)
    trials = cfg.n_trials
    if trials < 1:
        raise ConfigError("simulate needs trials >= 1")
    res = simulate_ser(c, b, pr, trials, seed=cfg.seed, workers=cfg.workers)
    pe = average_sep(c, b, pr)
    rows = []
    for m, ((mean, var), (zm, zv)) in enumerate(
            zip(res.empirical_moments, res.moment_z_scores(c, pr)), start=1):
        st = energy_stats(pr, float(c.powers[m - 1]))
        rows.append({"symbol_index": m, "p_m": c.powers[m - 1],
                     "trials": trials, "errors": res.errors_per_symbol[m - 1],
                     "mu_m": st.mu, "mean": mean, "z_mean": zm,
                     "sigma2_m": st.sigma2, "var": var, "z_var": zv,
                     "P_e": pe, "empirical_ser": res.empirical_ser,
                     "std_error": res.std_error})
    return rows, ("symbol_index", "p_m", "trials", "errors", "mu_m", "mean",
                  "z_mean", "sigma2_m", "var", "z_var", "P_e",
                  "empirical_ser", "std_error")


def _sweep_point(cfg, swept, value, K):
    pr = cfg.params(K=K, **{swept: value})
    res = optimize(pr, epsilon=cfg.epsilon)
    row = {swept: value, "K": K, "P_e": res.sep,
           "iterations": res.iterations, "converged": res.converged}
    if cfg.n_trials > 0:
        sim = simulate_ser(res.constellation, res.boundaries, pr,
                           cfg.n_trials, seed=cfg.seed)
        row["empirical_ser"] = sim.empirical_ser
        row["std_error"] = sim.std_error
    return row


def _run_sweep(cfg, swept, values):
    points = [(v, K) for v in values for K in cfg.k_values]
    job = lambda vk: _sweep_point(cfg, swept, *vk)
    if cfg.workers > 1:
        # map keeps input order whatever the completion order
        with ThreadPoolExecutor(max_workers=cfg.workers) as pool:
            rows = list(pool.map(job, points))
    else:
        rows = [job(pt) for pt in points]
    cols = [swept, "K", "P_e", "iterations", "converged"]
    if cfg.n_trials > 0:
        cols += ["empirical_ser", "std_error"]
    return rows, tuple(cols)


def run_sweep_n(cfg):
    return _run_sweep(cfg, "N", sorted(cfg.ns))


def run_sweep_m(cfg):
    return _run_sweep(cfg, "M", sorted(cfg.ms))


def run_sweep_snr(cfg):
    return _run_sweep(cfg, "snr_db", sorted(cfg.snrs))


def run_gaussianity(cfg):
    pr = cfg.params()
    rep = gaussianity_report(pr, pr.p_bar, cfg.n_trials, seed=cfg.seed)
    row = asdict(rep)
    row.update(N=pr.N, K=pr.K, p_m=pr.p_bar, moments_ok=rep.moments_ok(),
               quantiles_ok=rep.quantiles_ok())
    cols = ("N", "K", "p_m") + tuple(asdict(rep)) + ("moments_ok",
                                                     "quantiles_ok")
    return [row], cols


def run_convexity(cfg):
    rep = convexity_probe(cfg.params(), cfg.n_trials, rng_seed=cfg.seed)
    row = asdict(rep)
    row["passed"] = rep.violations == 0
    return [row], tuple(row)


# -- validation ----------------------------------------------------------------

CHECK_COLUMNS = ("check", "passed", "measured", "tolerance", "detail")


def _check(name, passed, measured, tolerance, detail=""):
    return {"check": name, "passed": bool(passed), "measured": measured,
            "tolerance": tolerance, "detail": detail}


def run_validate(cfg):
    pr = cfg.params()
    if cfg.powers is not None:
        # a supplied constellation must be valid before anything else runs
        validate_constellation(cfg.powers, pr)
    opt = optimize(pr, epsilon=cfg.epsilon)
    rows = []
    if "brute-force" in cfg.checks:
        bf = brute_force(pr, grid_step=cfg.grid_step)
        excess = opt.sep - bf.sep
        d_alpha = float(np.max(np.abs(opt.constellation.alpha
                                      - bf.constellation.alpha)))
        rows.append(_check("brute-force P_e", excess <= 1e-4, excess, 1e-4,
                           f"optimised={opt.sep:.6g} grid={bf.sep:.6g}"))
        rows.append(_check("brute-force alpha", d_alpha <= 0.05, d_alpha,
                           0.05, f"grid step {cfg.grid_step:g}"))
    if "convergence" in cfg.checks:
        limit = 20 if pr.M <= 4 else 40
        rows.append(_check("convergence", opt.converged
                           and opt.iterations <= limit, opt.iterations, limit,
                           f"epsilon={cfg.epsilon:g}"))
    trials = cfg.n_trials
    if "simulate" in cfg.checks and trials > 0:
        sim = simulate_ser(opt.constellation, opt.boundaries, pr, trials,
                           seed=cfg.seed, workers=cfg.workers)
        n = pr.M * trials
        # with no observed errors the empirical spread is zero; fall back to
        # the spread implied by the analytic value
        se = max(sim.std_error, math.sqrt(opt.sep * (1 - opt.sep) / n))
        dev = abs(sim.empirical_ser - opt.sep)
        rows.append(_check("simulated SER", dev <= 5 * se, dev, 5 * se,
                           f"empirical={sim.empirical_ser:.6g} "
                           f"analytic={opt.sep:.6g}"))
        z = max(max(abs(a), abs(b)) for a, b in
                sim.moment_z_scores(opt.constellation, pr))
        rows.append(_check("simulated moments", z <= 3.0, z, 3.0,
                           "max |z| over symbol means and variances"))
    if "gaussianity" in cfg.checks and trials >= 1000:
        rep = gaussianity_report(pr, pr.p_bar, trials, seed=cfg.seed)
        z = max(abs(rep.mean_z), abs(rep.var_z))
        rows.append(_check("gaussian moments", rep.moments_ok(3.0), z, 3.0,
                           f"N={pr.N}"))
    if "convexity" in cfg.checks:
        probe_trials = cfg.trials if cfg.trials is not None else 10_000
        rep = convexity_probe(pr, probe_trials, rng_seed=cfg.seed)
        rows.append(_check("convexity", rep.violations == 0, rep.violations,
                           0, f"max gap {rep.max_violation:.3g} over "
                           f"{rep.trials} trials, tolerance "
                           f"{rep.tolerance:g}"))
    return rows, CHECK_COLUMNS


RUNNERS = {
    "optimize": run_optimize, "sep": run_sep, "simulate": run_simulate,
    "brute-force": run_brute_force, "sweep-n": run_sweep_n,
    "sweep-m": run_sweep_m, "sweep-snr": run_sweep_snr,
    "gaussianity": run_gaussianity, "convexity": run_convexity,
    "validate": run_validate,
}


def run(cfg: ExperimentConfig) -> int:
    rows, columns = RUNNERS[cfg.scenario](cfg)
    _emit(render(rows, columns, cfg), cfg)
    failed = [r for r in rows if r.get("passed") is False]
    for r in failed:
        label = r.get("check", cfg.scenario)
        print(f"FAILED: {label}", file=sys.stderr)
    return 1 if failed else 0


def main(argv=None) -> int:
    try:
        cfg = resolve_config(argv)
        return run(cfg)
    except (EnergySimoError, OSError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2


if __name__ == "__main__":
    sys.exit(main())
