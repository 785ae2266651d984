"""Command-line harness: experiment configuration, replicate orchestration,
CSV emission, and the reproduction pipelines for the expected-error and
Monte Carlo validation figures.

Subcommands
-----------
expected-error   closed-form expected leverage / error curves with bounds
mc-validate      Monte Carlo means of per-design quantities vs closed forms
bounds           bound-certificate rows per design size
sample           node dumps (exact / iid replicates, or one MCMC chain)
quad-bias        quadrature bias curves, closed form plus Monte Carlo

Every command reads a JSON config with exactly the keys
{"model", "n_range", "m_list", "replicates", "seed", "sampler", "out",
"truncation"}, writes RFC-4180 CSV with frozen headers and '.' decimals,
and exits 0 iff all of its configured assertions pass (otherwise it prints
a machine-readable failure summary to stderr and exits 1).
"""

from __future__ import annotations

import argparse
import csv
import itertools
import json
import os
import sys
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, replace

import numpy as np

from .bounds import bound_report, error_upper_bound, family_beta_bound, width_lower_bound
from .gram import Design, gram, interpolation_error_sq, leverage_matrix
from .quad import bias_closed_form, make_rule, quadrature_estimate, true_integral
from .sampler import RngStream, sample_iid, sample_vs_exact, sample_vs_mcmc
from .spectra import (
    CoefficientVector,
    SpectralModel,
    eigenvalue,
    truncation_diagnostic,
)
from .sympoly import expected_eig_error_profile, expected_leverage_profile

SEED_ENV_VAR = "CVS_SEED"
Z_LIMIT = 4.0

CONFIG_KEYS = ("model", "n_range", "m_list", "replicates", "seed", "sampler", "out", "truncation")
SAMPLERS = ("exact", "mcmc", "iid")

EXPECTED_ERROR_HEADER = (
    "N",
    "m",
    "expected_error",
    "sigma_m",
    "expected_leverage",
    "upper_bound",
    "lower_bound",
    "tail_fraction",
)
MC_VALIDATE_HEADER = (
    "experiment",
    "model",
    "N",
    "m1",
    "m2",
    "estimate",
    "std_error",
    "closed_form",
    "bound",
    "seed",
)
QUAD_BIAS_HEADER = ("N", "m", "closed_form", "mc_bias", "mc_std_error", "replicates", "seed")


class ConfigError(ValueError):
    """Invalid experiment configuration; message pinpoints the offense."""


@dataclass(frozen=True)
class ExperimentConfig:
    """Parsed and validated experiment configuration."""

    model_descriptor: dict
    n_values: tuple[int, ...]
    m_list: tuple[int, ...]
    replicates: int
    seed: int | None
    sampler: str
    out: str
    truncation: int | None

    def models(self) -> list[tuple[str, SpectralModel]]:
        """(label, model) grid; a list-valued family parameter fans out into
        one model per value, each tagged for per-file emission."""
        desc = dict(self.model_descriptor)
        params = desc["param"]
        fan = params if isinstance(params, list) and desc["family"] != "custom" else [params]
        out = []
        for p in fan:
            model = SpectralModel.from_descriptor({**desc, "param": p})
            if self.truncation is not None:
                model = replace(model, truncation=self.truncation)
            label = f"{model.family}_{p}"
            out.append((label, model))
        return out


@dataclass(frozen=True)
class ResultRecord:
    """One row of Monte Carlo validation output."""

    experiment: str
    model: str
    n_nodes: int
    m1: int
    m2: int | None
    estimate: float
    std_error: float
    closed_form: float
    bound: float | None
    seed: int

    def csv_row(self) -> list:
        return [
            self.experiment,
            self.model,
            self.n_nodes,
            self.m1,
            "" if self.m2 is None else self.m2,
            repr(self.estimate),
            repr(self.std_error),
            repr(self.closed_form),
            "" if self.bound is None else repr(self.bound),
            self.seed,
        ]

    def z_score(self) -> float:
        if self.std_error == 0.0:
            return 0.0 if self.estimate == self.closed_form else float("inf")
        return (self.estimate - self.closed_form) / self.std_error


def load_config(path: str) -> ExperimentConfig:
    """Parse and validate a config file; errors carry file:line:column."""
    try:
        with open(path, "r", encoding="utf-8") as fh:
            raw = json.load(fh)
    except FileNotFoundError:
        raise ConfigError(f"{path}: no such config file") from None
    except json.JSONDecodeError as exc:
        raise ConfigError(f"{path}:{exc.lineno}:{exc.colno}: {exc.msg}") from None
    if not isinstance(raw, dict):
        raise ConfigError(f"{path}: config must be a JSON object")
    missing = [k for k in CONFIG_KEYS if k not in raw]
    extra = [k for k in raw if k not in CONFIG_KEYS]
    if missing:
        raise ConfigError(f"{path}: missing config keys {missing}")
    if extra:
        raise ConfigError(f"{path}: unknown config keys {extra}")

    desc = raw["model"]
    if not isinstance(desc, dict):
        raise ConfigError(f"{path}: 'model' must be an object")
    try:
        params = desc.get("param")
        probe = params if isinstance(params, list) and desc.get("family") != "custom" else [params]
        for p in probe:
            SpectralModel.from_descriptor({**desc, "param": p})
    except (ValueError, KeyError, TypeError) as exc:
        raise ConfigError(f"{path}: 'model': {exc}") from None

    n_range = raw["n_range"]
    if (
        not isinstance(n_range, list)
        or len(n_range) != 2
        or not all(isinstance(v, int) for v in n_range)
        or not 1 <= n_range[0] <= n_range[1]
    ):
        raise ConfigError(f"{path}: 'n_range' must be [lo, hi] with 1 <= lo <= hi")
    n_values = tuple(range(n_range[0], n_range[1] + 1))

    m_list = raw["m_list"]
    if (
        not isinstance(m_list, list)
        or not m_list
        or not all(isinstance(v, int) and v >= 1 for v in m_list)
    ):
        raise ConfigError(f"{path}: 'm_list' must be a non-empty list of integers >= 1")

    replicates = raw["replicates"]
    if not isinstance(replicates, int) or replicates < 1:
        raise ConfigError(f"{path}: 'replicates' must be an integer >= 1")

    seed = raw["seed"]
    if seed is not None and not isinstance(seed, int):
        raise ConfigError(f"{path}: 'seed' must be an integer or null")

    sampler = raw["sampler"]
    if sampler not in SAMPLERS:
        raise ConfigError(f"{path}: 'sampler' must be one of {SAMPLERS}")

    out = raw["out"]
    if not isinstance(out, str) or not out:
        raise ConfigError(f"{path}: 'out' must be a non-empty path string")

    truncation = raw["truncation"]
    if truncation is not None and (not isinstance(truncation, int) or truncation < 1):
        raise ConfigError(f"{path}: 'truncation' must be an integer >= 1 or null")

    config = ExperimentConfig(
        model_descriptor=desc,
        n_values=n_values,
        m_list=tuple(m_list),
        replicates=replicates,
        seed=seed,
        sampler=sampler,
        out=out,
        truncation=truncation,
    )
    for label, model in config.models():
        if max(config.n_values) > model.truncation:
            raise ConfigError(
                f"{path}: N values reach {max(config.n_values)} but {label} truncates at {model.truncation}"
            )
        if max(config.m_list) > model.truncation:
            raise ConfigError(
                f"{path}: m_list reaches {max(config.m_list)} but {label} truncates at {model.truncation}"
            )
    return config


def _write_csv(path: str, header, rows) -> None:
    with open(path, "w", newline="", encoding="utf-8") as fh:
        writer = csv.writer(fh)
        writer.writerow(header)
        writer.writerows(rows)


def _map_replicates(fn, count: int, threads: int) -> list:
    """Replicate results in index order; parallelism never changes output
    because each replicate derives from its own (seed, index) stream."""
    if threads <= 1:
        return [fn(r) for r in range(count)]
    with ThreadPoolExecutor(max_workers=threads) as pool:
        return list(pool.map(fn, range(count)))


def _mean_se(samples: np.ndarray) -> tuple[float, float]:
    n = len(samples)
    mean = float(np.mean(samples))
    se = float(np.std(samples, ddof=1) / np.sqrt(n)) if n > 1 else 0.0
    return mean, se


# ----------------------------------------------------------------------
# subcommands
# ----------------------------------------------------------------------


def cmd_expected_error(config: ExperimentConfig, out_dir: str, seed: int, threads: int) -> list[dict]:
    """Closed-form curves: one CSV per model with rows (N, m, eps_m, sigma_m,
    E tau_m, sigma_N (1 + beta_N), sigma_{N+1}, tail fraction).

    Asserts eps_m <= sigma_m and eps_m <= the upper bound wherever the bound
    is defined (N >= 2)."""
    failures: list[dict] = []
    tol = 1e-12
    for label, model in config.models():
        tail_frac = truncation_diagnostic(model)
        rows = []
        for n in config.n_values:
            eps = expected_eig_error_profile(model, n, config.m_list)
            lev = expected_leverage_profile(model, n, config.m_list)
            upper = error_upper_bound(model, n) if n >= 2 else None
            lower = width_lower_bound(model, n)
            for m, e, t in zip(config.m_list, eps, lev):
                sig = eigenvalue(model, m)
                rows.append(
                    [
                        n,
                        m,
                        repr(float(e)),
                        repr(sig),
                        repr(float(t)),
                        "" if upper is None else repr(upper),
                        repr(lower),
                        repr(tail_frac),
                    ]
                )
                if e > sig * (1.0 + tol):
                    failures.append({"check": "eps<=sigma", "model": label, "N": n, "m": m})
                if upper is not None and e > upper * (1.0 + tol):
                    failures.append({"check": "eps<=upper_bound", "model": label, "N": n, "m": m})
        _write_csv(os.path.join(out_dir, f"expected_error_{label}.csv"), EXPECTED_ERROR_HEADER, rows)
    return failures


def _draw_design(model: SpectralModel, sampler: str, n: int, stream: RngStream) -> Design:
    if sampler == "exact":
        return sample_vs_exact(model, n, stream)
    return sample_iid(model, n, stream)


def _mc_designs(model, sampler, n, replicates, seed, threads) -> list[Design]:
    """Replicate designs: independent streams for exact/iid, one thinned
    chain for mcmc (kept samples play the replicate role)."""
    if sampler == "mcmc":
        kept, _ = sample_vs_mcmc(model.kernel, n, sweeps=replicates * 10, rng=RngStream(seed, 0), thin=10)
        return kept
    return _map_replicates(
        lambda r: _draw_design(model, sampler, n, RngStream(seed, r)), replicates, threads
    )


def cmd_mc_validate(config: ExperimentConfig, out_dir: str, seed: int, threads: int) -> list[dict]:
    """Monte Carlo means of tau_m, tau_{m1,m2} and the squared embedding
    errors against their closed forms; asserts every |z| <= 4."""
    failures: list[dict] = []
    pairs = list(itertools.combinations(config.m_list, 2))[:5]
    for label, model in config.models():
        records: list[ResultRecord] = []
        for n in config.n_values:
            designs = _mc_designs(model, config.sampler, n, config.replicates, seed, threads)
            modes = list(config.m_list)
            mode_ix = {m: i for i, m in enumerate(modes)}

            def per_design(d: Design) -> tuple[np.ndarray, np.ndarray, np.ndarray]:
                factor = gram(model, d)
                tau = leverage_matrix(model, d, modes, factor=factor)
                errs = np.array(
                    [
                        interpolation_error_sq(model, CoefficientVector.unit(m), d, factor=factor)
                        for m in modes
                    ]
                )
                cross = np.array([tau[mode_ix[a], mode_ix[b]] for a, b in pairs])
                return np.diag(tau), cross, errs

            stats = [per_design(d) for d in designs]
            taus = np.array([s[0] for s in stats])
            crosses = np.array([s[1] for s in stats])
            errs = np.array([s[2] for s in stats])
            upper = error_upper_bound(model, n) if n >= 2 else None

            lev_profile = expected_leverage_profile(model, n, modes)
            err_profile = expected_eig_error_profile(model, n, modes)
            for i, m in enumerate(modes):
                est, se = _mean_se(taus[:, i])
                records.append(
                    ResultRecord("leverage", model.to_json(), n, m, None, est, se, float(lev_profile[i]), 1.0, seed)
                )
                est, se = _mean_se(errs[:, i])
                records.append(
                    ResultRecord("interp_error_sq", model.to_json(), n, m, None, est, se, float(err_profile[i]), upper, seed)
                )
            for j, (a, b) in enumerate(pairs):
                est, se = _mean_se(crosses[:, j])
                records.append(
                    ResultRecord("cross_leverage", model.to_json(), n, a, b, est, se, 0.0, None, seed)
                )
        for rec in records:
            z = rec.z_score()
            if abs(z) > Z_LIMIT:
                failures.append(
                    {
                        "check": "z_score",
                        "experiment": rec.experiment,
                        "model": label,
                        "N": rec.n_nodes,
                        "m1": rec.m1,
                        "m2": rec.m2,
                        "z": z,
                    }
                )
        _write_csv(
            os.path.join(out_dir, f"mc_validate_{label}.csv"),
            MC_VALIDATE_HEADER,
            [r.csv_row() for r in records],
        )
    return failures


def cmd_bounds(config: ExperimentConfig, out_dir: str, seed: int, threads: int) -> list[dict]:
    """Bound-certificate rows per N; asserts beta_N below the family
    constant (when one exists) and the lower bound below the upper."""
    from .bounds import BoundReport

    failures: list[dict] = []
    for label, model in config.models():
        rows = []
        for n in config.n_values:
            if n < 2:
                continue
            rep = bound_report(model, n)
            rows.append(rep.csv_row())
            if rep.family_constant is not None and rep.beta > rep.family_constant * (1 + 1e-12):
                failures.append({"check": "family_constant", "model": label, "N": n, "beta": rep.beta})
            if rep.lower_bound > rep.upper_bound * (1 + 1e-12):
                failures.append({"check": "lower<=upper", "model": label, "N": n})
        _write_csv(os.path.join(out_dir, f"bounds_{label}.csv"), BoundReport.CSV_HEADER, rows)
    return failures


def cmd_sample(config: ExperimentConfig, out_dir: str, seed: int, threads: int) -> list[dict]:
    """Dump sampled designs: one row per replicate (exact/iid) or per kept
    MCMC state, with the Gram log-determinant; MCMC also writes its
    diagnostics JSON."""
    for label, model in config.models():
        for n in config.n_values:
            header = ["replicate", "step"] + [f"node_{i}" for i in range(1, n + 1)] + ["logdet"]
            rows = []
            if config.sampler == "mcmc":
                kept, diag = sample_vs_mcmc(
                    model.kernel, n, sweeps=config.replicates * 10, rng=RngStream(seed, 0), thin=10
                )
                for step, (d, ld) in enumerate(zip(kept, diag.log_det_trace)):
                    rows.append([0, step] + [repr(float(v)) for v in d.nodes] + [repr(float(ld))])
                with open(
                    os.path.join(out_dir, f"sample_diagnostics_{label}_N{n}.json"), "w", encoding="utf-8"
                ) as fh:
                    json.dump(diag.to_dict(), fh, indent=2, sort_keys=True)
                    fh.write("\n")
            else:
                designs = _map_replicates(
                    lambda r: _draw_design(model, config.sampler, n, RngStream(seed, r)),
                    config.replicates,
                    threads,
                )
                for r, d in enumerate(designs):
                    rows.append(
                        [r, 0] + [repr(float(v)) for v in d.nodes] + [repr(gram(model, d).log_det)]
                    )
            _write_csv(os.path.join(out_dir, f"sample_{label}_N{n}.csv"), header, rows)
    return []


def cmd_quad_bias(config: ExperimentConfig, out_dir: str, seed: int, threads: int) -> list[dict]:
    """Quadrature bias curves for f = g = e_m, m in m_list: the closed form
    at every N plus the Monte Carlo mean.  Asserts |z| <= 4 and that each
    closed-form curve decreases strictly while it is above roundoff."""
    failures: list[dict] = []
    for label, model in config.models():
        rows = []
        closed: dict[int, list[float]] = {m: [] for m in config.m_list}
        for n in config.n_values:
            designs = _mc_designs(model, config.sampler, n, config.replicates, seed, threads)

            def per_design(d: Design) -> list[float]:
                factor = gram(model, d)
                out = []
                for m in config.m_list:
                    g = CoefficientVector.unit(m)
                    rule = make_rule(model, d, g, factor=factor)
                    out.append(true_integral(g, g) - quadrature_estimate(rule, g))
                return out

            bias_samples = np.array([per_design(d) for d in designs])
            for i, m in enumerate(config.m_list):
                cf = bias_closed_form(model, CoefficientVector.unit(m), CoefficientVector.unit(m), n)
                closed[m].append(cf)
                est, se = _mean_se(bias_samples[:, i])
                rows.append([n, m, repr(cf), repr(est), repr(se), config.replicates, seed])
                z = 0.0 if se == 0.0 else (est - cf) / se
                if abs(z) > Z_LIMIT:
                    failures.append({"check": "z_score", "model": label, "N": n, "m": m, "z": z})
        for m, curve in closed.items():
            for a, b in zip(curve, curve[1:]):
                if a > 1e-14 and not b < a:
                    failures.append({"check": "bias_strictly_decreasing", "model": label, "m": m})
                    break
        _write_csv(os.path.join(out_dir, f"quad_bias_{label}.csv"), QUAD_BIAS_HEADER, rows)
    return failures


COMMANDS = {
    "expected-error": cmd_expected_error,
    "mc-validate": cmd_mc_validate,
    "bounds": cmd_bounds,
    "sample": cmd_sample,
    "quad-bias": cmd_quad_bias,
}


def _resolve_seed(flag_seed: int | None, config: ExperimentConfig) -> int:
    if flag_seed is not None:
        return flag_seed
    if config.seed is not None:
        return config.seed
    env = os.environ.get(SEED_ENV_VAR)
    if env is not None:
        try:
            return int(env)
        except ValueError:
            raise ConfigError(f"{SEED_ENV_VAR} must be an integer, got {env!r}") from None
    raise ConfigError(f"no seed: pass --seed, set 'seed' in the config, or export {SEED_ENV_VAR}")


def main(argv: list[str] | None = None) -> int:
    parser = argparse.ArgumentParser(
        prog="volsamp",
        description="Volume-sampled kernel interpolation and quadrature experiments",
    )
    sub = parser.add_subparsers(dest="command", required=True)
    for name, fn in COMMANDS.items():
        p = sub.add_parser(name, help=fn.__doc__.splitlines()[0] if fn.__doc__ else None)
        p.add_argument("--config", required=True, help="path to the experiment JSON config")
        p.add_argument("--seed", type=int, default=None, help="master seed (overrides config)")
        p.add_argument("--out", default=None, help="output directory (overrides config)")
        p.add_argument("--threads", type=int, default=1, help="replicate worker threads")
    args = parser.parse_args(argv)

    try:
        config = load_config(args.config)
        seed = _resolve_seed(args.seed, config)
    except ConfigError as exc:
        print(json.dumps({"command": args.command, "error": str(exc)}), file=sys.stderr)
        return 2

    out_dir = args.out if args.out is not None else config.out
    os.makedirs(out_dir, exist_ok=True)
    failures = COMMANDS[args.command](config, out_dir, seed, max(1, args.threads))
    if failures:
        print(json.dumps({"command": args.command, "failures": failures}), file=sys.stderr)
        return 1
    return 0


if __name__ == "__main__":  # pragma: no cover
    sys.exit(main())
