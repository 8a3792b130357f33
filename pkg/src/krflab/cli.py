"""Command-line driver: ``krflab <command> ...``.

Exit codes: 0 success, 2 configuration or input error, 3 the integrator
reached the singularity before ``t_stop``, 4 a monitor or certificate
verdict failed.
"""

from __future__ import annotations

import argparse
import csv
import json
import logging
import re
import sys
from concurrent.futures import ProcessPoolExecutor, ThreadPoolExecutor
from dataclasses import asdict, dataclass, field
from pathlib import Path

from . import __version__, kernels
from .cohomology import (InvalidDimensionError, KahlerClass, NotKahlerError, ScenarioKind,
                         class_at, classify, first_singular_time)
from .integrator import (FlowConfig, SingularityReached, max_error_vs_exact, run_flow)
from .metric_space import (FlatTorus, MetricSpaceError, gh_convergence_certificate, gh_series,
                           thread_count)
from .monitors import SUITE_NAMES, run_suite
from .profile import ProfileError
from .storage import (StorageError, csv_text, dumps_json, load_trajectory, save_trajectory,
                      write_text_atomic)

log = logging.getLogger("krflab")

EXIT_OK, EXIT_CONFIG, EXIT_SINGULAR, EXIT_VERDICT = 0, 2, 3, 4
SCENARIOS = ("auto", "pm-validation") + tuple(k.value for k in ScenarioKind)
_FLOW_FIELDS = tuple(f for f in FlowConfig.__dataclass_fields__ if f not in ("c0", "validation"))


class ConfigError(ValueError):
    pass


@dataclass
class SampleConfig:
    base_side: float = 1.0
    nB: int = 16
    nF: int = 12
    n_theta: int = 65

    def validate(self):
        if not self.base_side > 0:
            raise ConfigError("samples.base_side must be positive")
        k = int(round(self.nB ** 0.5))
        if k * k != self.nB or self.nB < 1:
            raise ConfigError("samples.nB must be a positive perfect square")
        if self.nF < 1 or self.n_theta < 3:
            raise ConfigError("samples.nF must be >= 1 and samples.n_theta >= 3")


@dataclass
class ExperimentConfig:
    """One experiment: class, integrator settings, monitors and sampling.

    ``scenario`` is ``auto`` (classify from the class), ``pm-validation``
    (pure projective space, ``e = 0``) or the expected scenario name, which
    is checked against the class.
    """

    m: int
    h: float
    e: float
    scenario: str = "auto"
    flow: dict = field(default_factory=dict)
    suite: list = field(default_factory=lambda: ["all"])
    samples: SampleConfig = field(default_factory=SampleConfig)
    output: str = "krflab-out"
    seed: int = 0

    @classmethod
    def from_dict(cls, d: dict) -> "ExperimentConfig":
        if not isinstance(d, dict):
            raise ConfigError("config must be a JSON object")
        unknown = set(d) - set(cls.__dataclass_fields__)
        if unknown:
            raise ConfigError(f"unknown config fields: {sorted(unknown)}")
        d = dict(d)
        samples = d.pop("samples", {})
        if not isinstance(samples, dict):
            raise ConfigError("samples must be an object")
        bad = set(samples) - set(SampleConfig.__dataclass_fields__)
        if bad:
            raise ConfigError(f"unknown samples fields: {sorted(bad)}")
        try:
            cfg = cls(samples=SampleConfig(**samples), **d)
        except TypeError as exc:
            raise ConfigError(str(exc)) from exc
        cfg.validate()
        return cfg

    def to_dict(self) -> dict:
        return asdict(self)

    def validate(self) -> None:
        if self.scenario not in SCENARIOS:
            raise ConfigError(f"scenario must be one of {SCENARIOS}")
        bad = set(self.flow) - set(_FLOW_FIELDS)
        if bad:
            raise ConfigError(f"unknown flow fields: {sorted(bad)}")
        for name in self.suite:
            if name != "all" and name not in SUITE_NAMES:
                raise ConfigError(f"unknown monitor {name!r}")
        if int(self.seed) != self.seed:
            raise ConfigError("seed must be an integer")
        self.samples.validate()
        cfg = self.flow_config()  # raises on invalid class or grid
        if self.scenario not in ("auto", "pm-validation"):
            actual = classify(cfg.c0).value
            if actual != self.scenario:
                raise ConfigError(f"class (m={self.m}, h={self.h}, e={self.e}) is {actual}, "
                                  f"not {self.scenario}")

    def flow_config(self) -> FlowConfig:
        c0 = KahlerClass(self.m, self.h, self.e)
        return FlowConfig(c0=c0, validation=self.scenario == "pm-validation", **self.flow)

    def suite_names(self) -> tuple:
        return SUITE_NAMES if "all" in self.suite else tuple(self.suite)


def load_experiment(path) -> ExperimentConfig:
    try:
        data = json.loads(Path(path).read_text(encoding="utf-8"))
    except (OSError, json.JSONDecodeError) as exc:
        raise ConfigError(f"cannot read config {path}: {exc}") from exc
    return ExperimentConfig.from_dict(data)


# ---------------------------------------------------------------- commands

def cmd_singular_time(args) -> int:
    c0 = KahlerClass(args.m, args.h, args.e)
    T = first_singular_time(c0)
    cT = class_at(c0, T)
    out = {"T": T, "scenario": classify(c0).value, "class_at_T": {"h": cT.h, "e": cT.e}}
    sys.stdout.write(dumps_json(out))
    return EXIT_OK


def _run_and_save(cfg: FlowConfig, out: Path) -> int:
    try:
        traj = run_flow(cfg)
    except SingularityReached as exc:
        log.error("%s", exc)
        if exc.trajectory is not None and len(exc.trajectory.snapshots) > 0:
            save_trajectory(exc.trajectory, out)
        return EXIT_SINGULAR
    save_trajectory(traj, out)
    log.info("wrote %s (%d snapshots, %d steps)", out, len(traj.snapshots), traj.n_steps)
    return EXIT_OK


def cmd_run(args) -> int:
    exp = load_experiment(args.config)
    cfg = exp.flow_config()
    out = Path(args.out or exp.output) / "trajectory"
    code = _run_and_save(cfg, out)
    if code == EXIT_OK and args.refined:
        code = _run_and_save(cfg.refined(), Path(args.out or exp.output) / "trajectory_refined")
    return code


def _validate_one(m, N, L):
    cfg = FlowConfig(KahlerClass(m, 1.0, 0.0), L=L, N=N, validation=True, stop_fraction=0.2)
    out = {}
    for tag, c in (("base", cfg), ("refined", cfg.refined())):
        traj = run_flow(c)
        errs = max_error_vs_exact(traj)
        keep = traj.times <= 0.8 / (m + 1) * (1 + 1e-12)
        out[tag] = float(errs[keep].max())
    out["ratio"] = out["base"] / max(out["refined"], 1e-300)
    out["pass"] = bool(out["base"] <= 1e-3 and out["ratio"] >= 3.5)
    return m, out


def cmd_validate_pm(args) -> int:
    ms = args.m
    workers = min(thread_count(), len(ms))
    if workers > 1:
        with ProcessPoolExecutor(max_workers=workers) as ex:
            results = list(ex.map(_validate_one, ms, [args.N] * len(ms), [args.L] * len(ms)))
    else:
        results = [_validate_one(m, args.N, args.L) for m in ms]
    report = {str(m): r for m, r in results}
    text = dumps_json({"N": args.N, "L": args.L, "t_max_fraction": 0.8, "results": report})
    if args.out:
        write_text_atomic(Path(args.out) / "validate_pm.json", text)
    sys.stdout.write(text)
    return EXIT_OK if all(r["pass"] for _, r in results) else EXIT_VERDICT


def _load(path):
    try:
        return load_trajectory(path)
    except (OSError, ProfileError) as exc:
        raise StorageError(f"cannot load trajectory {path}: {exc}") from exc


def cmd_monitors(args) -> int:
    traj = _load(args.traj)
    refined = _load(args.refined) if args.refined else None
    names = SUITE_NAMES if args.suite == "all" else tuple(args.suite.split(","))
    for n in names:
        if n not in SUITE_NAMES:
            raise ConfigError(f"unknown monitor {n!r}; choose from {', '.join(SUITE_NAMES)}")
    try:
        with ThreadPoolExecutor(max_workers=thread_count()) as ex:
            reports = run_suite(traj, names, refined=refined, executor=ex)
    except ArithmeticError as exc:
        # a degenerate (non-monotone, non-finite) snapshot is a verdict, not a usage error
        sys.stderr.write(f"monitor failure: {exc}\n")
        return EXIT_VERDICT
    out = Path(args.out) if args.out else Path(args.traj) / "monitors"
    rows = []
    for r in reports:
        fname = re.sub(r"[^A-Za-z0-9_.-]+", "_", r.name).strip("_")
        write_text_atomic(out / f"{fname}.json", dumps_json(r.to_dict()))
        rows.append((r.name, r.paper_tag, float(r.C_meas), r.verdict))
    write_text_atomic(out / "summary.csv", csv_text(("monitor", "paper_tag", "C_meas", "verdict"), rows))
    failed = [r.name for r in reports if not r.passed]
    for r in reports:
        log.info("%-32s %s  C_meas=%.6g", r.name, r.verdict, r.C_meas)
    if failed:
        sys.stderr.write(f"monitor failures: {', '.join(failed)}\n")
        return EXIT_VERDICT
    return EXIT_OK


def cmd_gh(args) -> int:
    traj = _load(args.traj)
    base = FlatTorus(args.base_side)
    if not (traj.config.validation or traj.scenario is ScenarioKind.COLLAPSE_FIBER):
        raise ConfigError(f"gh needs a CollapseFiber trajectory, got {traj.scenario.value}")
    series = gh_series(traj, base, args.nB, args.nF, args.seed, args.n_theta)
    report = gh_convergence_certificate(traj, base, args.nB, args.nF, args.seed, args.n_theta,
                                        series=series)
    out = Path(args.out) if args.out else Path(args.traj) / "gh"
    rows = [(t, e, d, series.base_diam) for t, e, d in zip(series.times, series.epsilon,
                                                           series.fiber_diam)]
    write_text_atomic(out / "gh.csv", csv_text(("t", "epsilon", "fiber_diam", "base_diam"), rows))
    cert = report.to_dict()
    cert["samples"] = {"base_side": args.base_side, "nB": args.nB, "nF": args.nF,
                       "n_theta": args.n_theta, "seed": args.seed}
    write_text_atomic(out / "gh_certificate.json", dumps_json(cert))
    log.info("gh: final epsilon %.4g, target %.4g -> %s", series.epsilon[-1],
             report.details["target"], report.verdict)
    return EXIT_OK if report.passed else EXIT_VERDICT


def cmd_report(args) -> int:
    root = Path(args.dir)
    traj_dir = root / "trajectory" if (root / "trajectory").is_dir() else root
    meta_file = traj_dir / "trajectory.json"
    if not meta_file.is_file():
        raise StorageError(f"{root}: no trajectory found")
    meta = json.loads(meta_file.read_text(encoding="utf-8"))
    bundle = {"trajectory": {k: meta[k] for k in ("config", "n_steps", "n_rejected", "completed",
                                                   "n_snapshots")}}
    summary = traj_dir / "monitors" / "summary.csv"
    verdicts = []
    if summary.is_file():
        with open(summary, encoding="utf-8", newline="") as fh:
            mons = [dict(row, C_meas=float(row["C_meas"])) for row in csv.DictReader(fh)]
        verdicts += [row["verdict"] for row in mons]
        bundle["monitors"] = mons
    cert = traj_dir / "gh" / "gh_certificate.json"
    if cert.is_file():
        c = json.loads(cert.read_text(encoding="utf-8"))
        bundle["gh"] = {k: c[k] for k in ("verdict", "C_meas", "details", "samples")}
        verdicts.append(c["verdict"])
    bundle["all_pass"] = all(v == "pass" for v in verdicts)
    text = dumps_json(bundle)
    write_text_atomic(Path(args.out) if args.out else root / "report.json", text)
    sys.stdout.write(text)
    return EXIT_OK if bundle["all_pass"] else EXIT_VERDICT


# ------------------------------------------------------------------ parser

def build_parser() -> argparse.ArgumentParser:
    ap = argparse.ArgumentParser(prog="krflab", description=__doc__.splitlines()[0])
    ap.add_argument("--version", action="version", version=f"krflab {__version__}")
    ap.add_argument("-v", "--verbose", action="store_true", help="log progress to stderr")
    sub = ap.add_subparsers(dest="command", required=True)

    p = sub.add_parser("singular-time", help="first singular time and scenario of a class")
    p.add_argument("--m", type=int, required=True, help="complex dimension, at least 2")
    p.add_argument("--h", type=float, required=True, help="hyperplane coefficient")
    p.add_argument("--e", type=float, required=True, help="exceptional coefficient")
    p.set_defaults(func=cmd_singular_time)

    p = sub.add_parser("run", help="integrate the flow described by a JSON config")
    p.add_argument("--config", required=True, help="experiment JSON file")
    p.add_argument("--out", help="output root (default: the config's output field)")
    p.add_argument("--refined", action="store_true",
                   help="also run the (N, 1/dt, snapshot) doubled trajectory")
    p.set_defaults(func=cmd_run)

    p = sub.add_parser("validate-pm", help="exact shrinking projective-space oracle")
    p.add_argument("--m", type=int, nargs="+", default=[2, 3], help="dimensions to validate")
    p.add_argument("--N", type=int, default=4096, help="grid nodes of the base run")
    p.add_argument("--L", type=float, default=15.0, help="half-width of the rho interval")
    p.add_argument("--out", help="output directory")
    p.set_defaults(func=cmd_validate_pm)

    p = sub.add_parser("monitors", help="evaluate estimate monitors on a trajectory")
    p.add_argument("--traj", required=True, help="trajectory directory written by run")
    p.add_argument("--suite", default="all", help="'all' or comma-separated monitor names")
    p.add_argument("--refined", help="refined trajectory for stability checks")
    p.add_argument("--out", help="output directory")
    p.set_defaults(func=cmd_monitors)

    p = sub.add_parser("gh", help="Gromov-Hausdorff collapse certificate")
    p.add_argument("--traj", required=True, help="trajectory directory written by run")
    p.add_argument("--base-side", type=float, default=1.0, help="side of the flat torus base")
    p.add_argument("--nB", type=int, default=16, help="base samples, a perfect square")
    p.add_argument("--nF", type=int, default=12, help="fiber samples")
    p.add_argument("--n-theta", type=int, default=65, help="angular lattice nodes")
    p.add_argument("--seed", type=int, default=0, help="fiber sampling seed")
    p.add_argument("--out", help="output directory")
    p.set_defaults(func=cmd_gh)

    p = sub.add_parser("report", help="bundle trajectory, monitor and gh results")
    p.add_argument("--dir", required=True, help="run output root or trajectory directory")
    p.add_argument("--out", help="output directory")
    p.set_defaults(func=cmd_report)
    return ap


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING,
                        format="%(levelname)s %(name)s: %(message)s")
    log.debug("kernel backend: %s", kernels.BACKEND)
    try:
        return args.func(args)
    except (NotKahlerError, InvalidDimensionError, ConfigError, StorageError, ProfileError,
            MetricSpaceError) as exc:
        sys.stderr.write(f"error: {exc}\n")
        return EXIT_CONFIG
    except (ValueError, KeyError) as exc:
        sys.stderr.write(f"error: {exc}\n")
        return EXIT_CONFIG


if __name__ == "__main__":
    sys.exit(main())
