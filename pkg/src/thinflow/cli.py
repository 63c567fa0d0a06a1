"""Experiment orchestration: configured runs, sweeps, and artifact output.

Subcommands: simulate | sweep | estimate-constants | verify-inequalities |
rescale-check | thresholds.  Configuration is a plain-text key=value file
(``#`` comments allowed); any value can be overridden on the command line
with repeated ``--set key=value`` flags, which is what scripted sweeps use.
Every scenario writes its artifacts (CSV/JSON as documented per module) plus
a manifest.json carrying the resolved config, its hash, package versions and
wall time.  All randomness flows from the single ``seed`` key, so identical
config and seed reproduce identical CSV/JSON artifact bytes (manifests carry
wall time and are exempt).  The default output root is the THINFLOW_OUT_ROOT
environment variable, falling back to ./thinflow-out.

Exit codes: 0 success, 2 invalid configuration (line-anchored message),
3 simulation blow-up (forensic dump written to blowup.json).
"""

from __future__ import annotations

import argparse
import hashlib
import json
import os
import sys
import time
from concurrent.futures import ThreadPoolExecutor

import numpy as np
import scipy

from . import __version__
from . import diagnostics as dg
from . import gronwall as gw
from . import inequalities as iq
from . import solver as sv
from . import spectral as sp

EXIT_OK = 0
EXIT_CONFIG = 2
EXIT_BLOWUP = 3

SCENARIOS = (
    "simulate",
    "sweep",
    "estimate-constants",
    "verify-inequalities",
    "rescale-check",
    "thresholds",
)


class ConfigError(Exception):
    pass


def parse_config_file(path: str) -> dict[str, str]:
    out: dict[str, str] = {}
    try:
        lines = open(path).read().splitlines()
    except OSError as exc:
        raise ConfigError(f"{path}: cannot read config: {exc}") from exc
    for lineno, raw in enumerate(lines, 1):
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        if "=" not in line:
            raise ConfigError(f"{path}:{lineno}: expected key=value, got {raw.strip()!r}")
        key, value = line.split("=", 1)
        key = key.strip()
        if not key:
            raise ConfigError(f"{path}:{lineno}: empty key")
        out[key] = value.strip()
    return out


def _coerce(cfg: dict, key: str, cast, default=None, required: bool = False):
    if key not in cfg:
        if required:
            raise ConfigError(f"missing required config key {key!r}")
        return default
    raw = cfg[key]
    try:
        if cast is bool:
            if raw.lower() in ("1", "true", "yes", "on"):
                return True
            if raw.lower() in ("0", "false", "no", "off"):
                return False
            raise ValueError(raw)
        return cast(raw)
    except ValueError as exc:
        raise ConfigError(f"config key {key!r}: cannot parse {raw!r} as {cast.__name__}") from exc


def _float_list(cfg: dict, key: str, required: bool = False, default=None):
    raw = cfg.get(key)
    if raw is None:
        if required:
            raise ConfigError(f"missing required config key {key!r}")
        return default
    try:
        return [float(v) for v in raw.split(",") if v.strip()]
    except ValueError as exc:
        raise ConfigError(f"config key {key!r}: expected comma-separated floats") from exc


def _domain_from(cfg: dict) -> sp.DomainSpec:
    return sp.DomainSpec(
        l1=_coerce(cfg, "l1", float, required=True),
        l2=_coerce(cfg, "l2", float, required=True),
        eps=_coerce(cfg, "eps", float, required=True),
        nu=_coerce(cfg, "nu", float, required=True),
        n1=_coerce(cfg, "n1", int, required=True),
        n2=_coerce(cfg, "n2", int, required=True),
        n3=_coerce(cfg, "n3", int, required=True),
    )


def _out_dir(cfg: dict, scenario: str) -> str:
    root = cfg.get("out")
    if root is None:
        root = os.path.join(os.environ.get("THINFLOW_OUT_ROOT", "thinflow-out"), scenario)
    os.makedirs(root, exist_ok=True)
    return root


def _config_hash(cfg: dict) -> str:
    blob = "\n".join(f"{k}={cfg[k]}" for k in sorted(cfg))
    return hashlib.sha256(blob.encode()).hexdigest()


def _write_manifest(out: str, scenario: str, cfg: dict, artifacts: list[str], t0: float) -> None:
    manifest = {
        "scenario": scenario,
        "config": dict(sorted(cfg.items())),
        "config_hash": _config_hash(cfg),
        "thinflow_version": __version__,
        "numpy_version": np.__version__,
        "scipy_version": scipy.__version__,
        "wall_time_s": time.time() - t0,
        "artifacts": sorted(artifacts),
    }
    with open(os.path.join(out, "manifest.json"), "w") as fh:
        json.dump(manifest, fh, indent=2, sort_keys=True)


def _build_forcing(cfg: dict, domain: sp.DomainSpec, rng: np.random.Generator) -> sv.ForcingSpec:
    kind = cfg.get("forcing.kind", "off")
    if kind == "off":
        return sv.ForcingSpec.off(domain)
    profile_kind = cfg.get("forcing.profile", "z-independent")
    profile = sv.make_initial(
        domain,
        profile_kind,
        u_target=1.0,
        seed=int(rng.integers(0, 2**31)),
        slope=_coerce(cfg, "forcing.slope", float, default=-2.0),
    )
    amplitude = _coerce(cfg, "forcing.amplitude", float, default=0.01)
    if kind == "steady":
        return sv.ForcingSpec.steady(profile, amplitude)
    if kind == "sin":
        return sv.ForcingSpec.sinusoidal(
            profile,
            omega=_coerce(cfg, "forcing.omega", float, default=1.0),
            amplitude=amplitude,
            phase=_coerce(cfg, "forcing.phase", float, default=0.0),
        )
    raise ConfigError(f"config key 'forcing.kind': unknown kind {kind!r}")


def _simulate_impl(cfg: dict, out: str) -> tuple[sv.RunResult, dict, list[str]]:
    domain = _domain_from(cfg)
    seed = _coerce(cfg, "seed", int, default=0)
    rng = np.random.default_rng(seed)
    u0 = sv.make_initial(
        domain,
        cfg.get("initial.kind", "random-divfree"),
        u_target=_coerce(cfg, "initial.u", float, default=0.1),
        seed=int(rng.integers(0, 2**31)),
        slope=_coerce(cfg, "initial.slope", float, default=-2.0),
        q_fraction=_coerce(cfg, "initial.q_fraction", float, default=0.3),
    )
    forcing = _build_forcing(cfg, domain, rng)
    run_cfg = sv.SolverConfig(
        dt=_coerce(cfg, "dt", float, required=True),
        t_end=_coerce(cfg, "t_end", float, required=True),
        scheme=cfg.get("scheme", "etd-rk2"),
        dealias=_coerce(cfg, "dealias", bool, default=True),
        diag_stride=_coerce(cfg, "diag_stride", int, default=1),
        checkpoint_stride=_coerce(cfg, "checkpoint_stride", int, default=0),
        enforce_cfl=_coerce(cfg, "enforce_cfl", bool, default=True),
    )
    result = sv.run(u0, forcing, run_cfg, out_dir=out, run_id="run")
    artifacts = []
    diag_path = os.path.join(out, "diagnostics.csv")
    result.series.to_csv(diag_path)
    artifacts.append("diagnostics.csv")
    meta = {
        "U": sp.h1_norm(u0),
        "F": forcing.f_bound,
        "M": max(sp.h1_norm(u0), (domain.l1 / domain.nu) * forcing.f_bound),
        "domain": {
            "l1": domain.l1, "l2": domain.l2, "eps": domain.eps, "nu": domain.nu,
            "n1": domain.n1, "n2": domain.n2, "n3": domain.n3,
        },
        "scheme": run_cfg.scheme,
        "dt": run_cfg.dt,
        "t_end": run_cfg.t_end,
        "seed": seed,
        "blowup": result.blowup,
    }
    with open(os.path.join(out, "run_meta.json"), "w") as fh:
        json.dump(meta, fh, indent=2, sort_keys=True)
    artifacts.append("run_meta.json")
    if result.final_state is not None:
        final_path = os.path.join(out, "run_final.ckpt")
        sp.save_checkpoint(
            result.final_state.u, final_path,
            time=result.final_state.t, step=result.final_state.step,
        )
        artifacts.append("run_final.ckpt")
    artifacts += [os.path.basename(p) for p in result.checkpoints]
    return result, meta, artifacts


def cmd_simulate(cfg: dict) -> int:
    t0 = time.time()
    out = _out_dir(cfg, "simulate")
    result, meta, artifacts = _simulate_impl(cfg, out)
    if result.blew_up:
        with open(os.path.join(out, "blowup.json"), "w") as fh:
            json.dump(result.blowup, fh, indent=2, sort_keys=True)
        artifacts.append("blowup.json")
        _write_manifest(out, "simulate", cfg, artifacts, t0)
        print(f"blow-up at t={result.blowup['time']:.6g}; forensic dump in {out}/blowup.json")
        return EXIT_BLOWUP
    _write_manifest(out, "simulate", cfg, artifacts, t0)
    print(f"simulate: {len(result.series)} samples -> {out}")
    return EXIT_OK


def cmd_verify_inequalities(cfg: dict) -> int:
    t0 = time.time()
    out = _out_dir(cfg, "verify-inequalities")
    in_dir = cfg.get("in")
    if in_dir is None:
        raise ConfigError("missing required config key 'in' (a simulate output directory)")
    series = dg.DiagnosticSeries.from_csv(os.path.join(in_dir, "diagnostics.csv"))
    with open(os.path.join(in_dir, "run_meta.json")) as fh:
        meta = json.load(fh)
    if meta.get("blowup"):
        raise ConfigError("input run blew up; nothing to verify")
    dom = meta["domain"]
    domain = sp.DomainSpec(**dom)
    regime = cfg.get("regime", "planar")
    regimes = list(dg.REGIMES) if regime == "all" else [regime]
    slack_rel = _coerce(cfg, "slack_rel", float, default=1e-6)
    artifacts = []
    all_reports = []
    for reg in regimes:
        reports = dg.check_diff_inequalities(
            series, eps=domain.eps, regime=reg, slack_rel=slack_rel, trajectory_id=in_dir
        )
        all_reports.extend(reports)
        trace_name = f"residual_traces_{reg}.csv"
        dg.write_residual_traces(reports, os.path.join(out, trace_name))
        artifacts.append(trace_name)
    dg.reports_to_json(all_reports, os.path.join(out, "inequality_reports.json"))
    artifacts.append("inequality_reports.json")

    bounds = dg.evaluate_regularity_bounds(
        series, U=meta["U"], F=meta["F"], l1=domain.l1, l2=domain.l2,
        nu=domain.nu, eps=domain.eps,
    )
    with open(os.path.join(out, "regularity_bounds.json"), "w") as fh:
        json.dump(bounds.to_dict(), fh, indent=2, sort_keys=True)
    artifacts.append("regularity_bounds.json")

    # the envelope needs one of the two system regimes (the split per-quantity
    # inequalities alone do not assemble into a comparison system)
    env_regime = "planar" if "planar" in regimes else ("full" if "full" in regimes else None)
    if env_regime is not None and _coerce(cfg, "envelope", bool, default=True):
        fit_reports = [r for r in all_reports if r.name.startswith(env_regime)]
        system = gw.InequalitySystem.from_fits(
            domain, fit_reports, U=meta["U"], F=meta["F"], regime=env_regime
        )
        env = gw.solve_envelope(system, horizon=float(series.times[-1]), times=series.times)
        containment = gw.check_trajectory(series, system)
        env.to_csv(os.path.join(out, "envelope.csv"))
        gw.envelope_report_json(env, containment, os.path.join(out, "containment.json"))
        artifacts += ["envelope.csv", "containment.json"]

    _write_manifest(out, "verify-inequalities", cfg, artifacts, t0)
    n_pass = sum(r.passed for r in all_reports)
    print(f"verify-inequalities: {n_pass}/{len(all_reports)} pass -> {out}")
    return EXIT_OK if n_pass == len(all_reports) else 1


def cmd_estimate_constants(cfg: dict) -> int:
    t0 = time.time()
    out = _out_dir(cfg, "estimate-constants")
    domain = _domain_from(cfg)
    inequality = cfg.get("inequality")
    if inequality is None:
        raise ConfigError("missing required config key 'inequality'")
    est = iq.estimate_constant(
        inequality,
        domain,
        budget=_coerce(cfg, "budget", int, default=200),
        seed=_coerce(cfg, "seed", int, default=0),
        oversample=_coerce(cfg, "oversample", int, default=4),
        alpha=_coerce(cfg, "alpha", float, default=1.0),
        p=_coerce(cfg, "p", float, default=4.0),
    )
    maximizer = est.maximizer
    if isinstance(maximizer, iq.Field2D):
        maximizer = maximizer.embed(eps=domain.eps, nu=domain.nu)
    ckpt = os.path.join(out, "maximizer.ckpt")
    sp.save_checkpoint(maximizer, ckpt, extra={"inequality": inequality})
    iq.estimate_to_json(est, os.path.join(out, "estimate.json"), maximizer_ref="maximizer.ckpt")
    iq.write_sweep_csv(os.path.join(out, "ratios.csv"), [domain.eps], [est])
    _write_manifest(
        out, "estimate-constants", cfg, ["estimate.json", "maximizer.ckpt", "ratios.csv"], t0
    )
    print(f"estimate-constants[{inequality}]: max ratio {est.max_ratio:.6g} -> {out}")
    return EXIT_OK


def cmd_sweep(cfg: dict) -> int:
    t0 = time.time()
    out = _out_dir(cfg, "sweep")
    inequality = cfg.get("inequality", "thin-sup")
    eps_values = _float_list(cfg, "eps_list", required=True)
    l1 = _coerce(cfg, "l1", float, default=4.0)
    l2 = _coerce(cfg, "l2", float, default=l1)
    n3 = _coerce(cfg, "n3", int, default=2)
    cap = _coerce(cfg, "cap", int, default=64)
    budget = _coerce(cfg, "budget", int, default=20)
    seed = _coerce(cfg, "seed", int, default=0)
    parallelism = _coerce(cfg, "parallelism", int, default=1)
    refine = _coerce(cfg, "refine", bool, default=False)
    seeds = [int(s.generate_state(1)[0]) for s in np.random.SeedSequence(seed).spawn(len(eps_values))]

    def one(idx: int) -> iq.ConstantEstimate:
        eps = eps_values[idx]
        res = iq.thin_sweep_resolution(eps, l1=l1, cap=cap, n3=n3)
        domain = sp.DomainSpec(l1=l1, l2=l2, eps=eps, nu=1.0, n1=res[0], n2=res[1], n3=res[2])
        est = iq.estimate_constant(
            inequality, domain, budget=budget, seed=seeds[idx], refine=refine
        )
        sub = os.path.join(out, f"eps_{eps:g}")
        os.makedirs(sub, exist_ok=True)
        maximizer = est.maximizer
        if isinstance(maximizer, iq.Field2D):
            maximizer = maximizer.embed(eps=eps, nu=1.0)
        sp.save_checkpoint(maximizer, os.path.join(sub, "maximizer.ckpt"))
        iq.estimate_to_json(est, os.path.join(sub, "estimate.json"), maximizer_ref="maximizer.ckpt")
        return est

    if parallelism > 1:
        with ThreadPoolExecutor(max_workers=parallelism) as pool:
            estimates = list(pool.map(one, range(len(eps_values))))
    else:
        estimates = [one(i) for i in range(len(eps_values))]

    iq.write_sweep_csv(os.path.join(out, "sweep.csv"), eps_values, estimates)
    fit = iq.fit_eps_scaling(inequality, eps_values, estimates)
    with open(os.path.join(out, "scaling_fit.json"), "w") as fh:
        json.dump(fit.to_dict(), fh, indent=2, sort_keys=True)
    artifacts = ["sweep.csv", "scaling_fit.json"] + [
        f"eps_{e:g}/estimate.json" for e in eps_values
    ]
    _write_manifest(out, "sweep", cfg, artifacts, t0)
    print(
        f"sweep[{inequality}]: slope {fit.slope:.4f}"
        + (f" (expected {fit.expected_slope})" if fit.expected_slope else "")
        + f" -> {out}"
    )
    return EXIT_OK


def cmd_rescale_check(cfg: dict) -> int:
    t0 = time.time()
    out = _out_dir(cfg, "rescale-check")
    domain = _domain_from(cfg)
    seed = _coerce(cfg, "seed", int, default=0)
    rng = np.random.default_rng(seed)
    slope = _coerce(cfg, "slope", float, default=-1.0)
    u = sp.leray(sp.random_field(domain, rng, slope=slope)) * 0.1
    f = sp.leray(sp.random_field(domain, rng, slope=slope)) * 0.1
    res = gw.rescale(u, f)
    back = gw.inverse_rescale(res.u_tilde, domain)
    roundtrip = sp.norm_l2(back - u) / max(sp.norm_l2(u), 1e-300)
    report = {
        "n": res.n,
        "normalized_domain": {
            "l1": res.domain.l1, "l2": res.domain.l2, "eps": res.domain.eps,
        },
        "time_factor": res.time_factor,
        "residual_f_identity": res.residual_f_identity,
        "residual_u_identity": res.residual_u_identity,
        "roundtrip_residual": roundtrip,
        "rhs_residual": gw.rescale_rhs_residual(u, f),
    }
    with open(os.path.join(out, "rescale_report.json"), "w") as fh:
        json.dump(report, fh, indent=2, sort_keys=True)
    _write_manifest(out, "rescale-check", cfg, ["rescale_report.json"], t0)
    print(
        f"rescale-check: n={res.n} identities "
        f"(f: {res.residual_f_identity:.2e}, u: {res.residual_u_identity:.2e}) -> {out}"
    )
    return EXIT_OK


def cmd_thresholds(cfg: dict) -> int:
    t0 = time.time()
    out = _out_dir(cfg, "thresholds")
    eps_values = _float_list(cfg, "eps_list", default=[0.1, 0.01, 0.001])
    table = gw.literature_thresholds(
        eps_values,
        delta=_coerce(cfg, "delta", float, default=0.01),
        c=_coerce(cfg, "c", float, default=1.0),
    )
    gw.write_thresholds_csv(table, os.path.join(out, "thresholds.csv"))
    with open(os.path.join(out, "thresholds.json"), "w") as fh:
        json.dump(table, fh, indent=2, sort_keys=True)
    _write_manifest(out, "thresholds", cfg, ["thresholds.csv", "thresholds.json"], t0)
    print(f"thresholds: {len(eps_values)} eps values -> {out}")
    return EXIT_OK


_COMMANDS = {
    "simulate": cmd_simulate,
    "sweep": cmd_sweep,
    "estimate-constants": cmd_estimate_constants,
    "verify-inequalities": cmd_verify_inequalities,
    "rescale-check": cmd_rescale_check,
    "thresholds": cmd_thresholds,
}


class ExperimentConfig:
    """A scenario name plus its resolved key=value settings."""

    __slots__ = ("scenario", "values")

    def __init__(self, scenario: str, values: dict[str, str]):
        if scenario not in SCENARIOS:
            raise ConfigError(f"unknown scenario {scenario!r}; pick one of {SCENARIOS}")
        self.scenario = scenario
        self.values = dict(values)

    @classmethod
    def load(
        cls, scenario: str, path: str | None = None, overrides: dict[str, str] | None = None
    ) -> "ExperimentConfig":
        values: dict[str, str] = {}
        if path is not None:
            values.update(parse_config_file(path))
        declared = values.pop("scenario", None)
        if declared is not None and declared != scenario:
            raise ConfigError(
                f"config declares scenario={declared!r} but {scenario!r} was requested"
            )
        if overrides:
            values.update({k: str(v) for k, v in overrides.items()})
        return cls(scenario, values)


def run_scenario(cfg: ExperimentConfig) -> int:
    """Execute a configured scenario; returns the process exit status."""
    return _COMMANDS[cfg.scenario](cfg.values)


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="thinflow",
        description="Pseudo-spectral thin-box Navier-Stokes experiments",
    )
    sub = parser.add_subparsers(dest="scenario", required=True)
    for name in SCENARIOS:
        p = sub.add_parser(name, help=f"run the {name} scenario")
        p.add_argument("-c", "--config", help="key=value config file")
        p.add_argument(
            "--set",
            action="append",
            default=[],
            metavar="KEY=VALUE",
            help="override a config value (repeatable)",
        )
        p.add_argument("--out", help="output directory (overrides config)")
        p.add_argument("--seed", type=int, help="seed (overrides config)")
    return parser


def resolve_config(args) -> dict[str, str]:
    cfg: dict[str, str] = {}
    if args.config:
        cfg.update(parse_config_file(args.config))
    if "scenario" in cfg and cfg["scenario"] != args.scenario:
        raise ConfigError(
            f"config declares scenario={cfg['scenario']!r} but the "
            f"{args.scenario!r} subcommand was invoked"
        )
    for item in args.set:
        if "=" not in item:
            raise ConfigError(f"--set {item!r}: expected KEY=VALUE")
        key, value = item.split("=", 1)
        cfg[key.strip()] = value.strip()
    if args.out:
        cfg["out"] = args.out
    if args.seed is not None:
        cfg["seed"] = str(args.seed)
    cfg.pop("scenario", None)
    return cfg


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        cfg = resolve_config(args)
        return run_scenario(ExperimentConfig(args.scenario, cfg))
    except ConfigError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except (ValueError, FileNotFoundError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_CONFIG


if __name__ == "__main__":
    sys.exit(main())
