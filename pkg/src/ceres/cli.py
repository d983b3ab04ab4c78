"""Experiment runner: reproducible desk-scale studies over all modules.

Subcommands map to study families; each writes one CSV per study plus a
JSON summary into the output directory and prints a PASS/FAIL line per
named acceptance criterion.  Exit codes: 0 all criteria pass, 1 a
criterion failed, 2 bad usage or configuration.

Wall-clock duration goes to the console only; output files contain
nothing machine- or time-dependent, so reruns with the same config and
seed are byte-identical.
"""

from __future__ import annotations

import argparse
from dataclasses import dataclass, fields, replace
import importlib.resources
import json
import os
from pathlib import Path
import sys
import time

from . import qp as qp_mod
from . import scm as scm_mod
from . import studies
from .errors import CeresError, ConfigError
from .parallel import default_jobs
from .report import config_hash, write_csv, write_json

SUBCOMMANDS = ("backdoor-exp", "frontdoor-exp", "qp-verify", "membank-exp",
               "nwgm-gap", "all")

DEFAULT_TAU_GRID = (1.0, 0.3, 0.1, 0.03, 0.01)


@dataclass(frozen=True)
class ExperimentConfig:
    subcommand: str
    seed: int = 0
    out: str = "ceres-out"
    trials: int = 200
    window: int = 5
    kappa: float = 1.0
    rho: float = 0.5
    tau_grid: tuple = DEFAULT_TAU_GRID
    tol: float = 1e-12
    jobs: int = 0            # 0 means "logical core count"
    spec: str | None = None
    n_samples: int = 10_000

    def validate(self) -> "ExperimentConfig":
        if self.subcommand not in SUBCOMMANDS:
            raise ConfigError(f"unknown subcommand {self.subcommand!r}")
        if self.trials < 1:
            raise ConfigError(f"trials must be >= 1, got {self.trials}")
        if self.window < 0:
            raise ConfigError(f"window must be >= 0, got {self.window}")
        if not self.kappa > 0:
            raise ConfigError(f"kappa must be > 0, got {self.kappa}")
        if not 0.0 <= self.rho <= 1.0:
            raise ConfigError(f"rho must lie in [0, 1], got {self.rho}")
        if not self.tol > 0:
            raise ConfigError(f"tol must be > 0, got {self.tol}")
        if self.n_samples < 1:
            raise ConfigError(f"n_samples must be >= 1, got {self.n_samples}")
        grid = tuple(float(t) for t in self.tau_grid)
        if not grid or any(t <= 0 for t in grid):
            raise ConfigError(f"tau grid must be positive, got {grid}")
        if any(b >= a for a, b in zip(grid, grid[1:])):
            raise ConfigError(f"tau grid must be strictly descending, got {grid}")
        return replace(self, tau_grid=grid)

    def semantic(self) -> dict:
        """Knobs that shape the results; excludes out/jobs, which only
        change where bytes land and how fast they are produced."""
        return {
            "subcommand": self.subcommand,
            "seed": self.seed,
            "trials": self.trials,
            "window": self.window,
            "kappa": self.kappa,
            "rho": self.rho,
            "tau_grid": list(self.tau_grid),
            "tol": self.tol,
            "spec": self.spec,
            "n_samples": self.n_samples,
        }

    @property
    def effective_jobs(self) -> int:
        return self.jobs if self.jobs >= 1 else default_jobs()


def fixtures_dir() -> Path:
    override = os.environ.get("CERES_FIXTURES")
    if override:
        return Path(override)
    return Path(importlib.resources.files("ceres") / "fixtures")


def load_fixture_spec(name: str) -> scm_mod.ScmSpec:
    return scm_mod.load_spec(fixtures_dir() / name)


def load_fixture_problems() -> list:
    return qp_mod.load_problems(fixtures_dir() / "qp_problems.json")


# ---------------------------------------------------------------------------
# Subcommand runners: each returns a list of StudyResult.

def _run_backdoor(cfg: ExperimentConfig) -> list:
    if cfg.spec:
        spec = scm_mod.load_spec(cfg.spec)
        label = Path(cfg.spec).name
    else:
        spec = load_fixture_spec("scm_noconf.json")
        label = "scm_noconf.json"
    return [
        studies.backdoor_identity_study(cfg.seed, trials=cfg.trials,
                                        tol=cfg.tol, jobs=cfg.effective_jobs),
        studies.spec_identity_study(spec, label=label, tol=cfg.tol),
        studies.nwgm_gap_study(cfg.seed, jobs=cfg.effective_jobs),
    ]


def _run_nwgm(cfg: ExperimentConfig) -> list:
    return [
        studies.nwgm_exactness_study(cfg.seed, trials=max(100, cfg.trials // 2),
                                     jobs=cfg.effective_jobs),
    ]


def _run_frontdoor(cfg: ExperimentConfig) -> list:
    spec = scm_mod.load_spec(cfg.spec) if cfg.spec else load_fixture_spec("scm_4state.json")
    return [
        studies.frontdoor_identity_study(cfg.seed, trials=cfg.trials,
                                         neg_trials=max(20, cfg.trials // 10),
                                         tol=cfg.tol, jobs=cfg.effective_jobs),
        studies.robustness_study(cfg.seed, spec, rho=cfg.rho,
                                 n_samples=cfg.n_samples, n_seeds=cfg.trials,
                                 jobs=cfg.effective_jobs),
        studies.gate_contract_study(cfg.seed, trials=max(100, cfg.trials // 2),
                                    jobs=cfg.effective_jobs),
    ]


def _run_qp(cfg: ExperimentConfig) -> list:
    bundled = load_fixture_problems()
    return [
        studies.qp_oracle_study(cfg.seed, bundled, trials=max(100, cfg.trials // 2),
                                tau_grid=cfg.tau_grid, jobs=cfg.effective_jobs),
        studies.isotropic_slack_study(cfg.seed, jobs=cfg.effective_jobs),
    ]


def _run_membank(cfg: ExperimentConfig) -> list:
    return [
        studies.membank_study(cfg.seed, window=max(1, cfg.window),
                              lln_seeds=cfg.trials, lln_kappa=cfg.kappa,
                              jobs=cfg.effective_jobs),
    ]


_RUNNERS = {
    "backdoor-exp": _run_backdoor,
    "frontdoor-exp": _run_frontdoor,
    "qp-verify": _run_qp,
    "membank-exp": _run_membank,
    "nwgm-gap": _run_nwgm,
}


def _emit_study(result: studies.StudyResult, out: Path, cfg_hash: str, seed: int):
    """Write the study's table(s); nested tables live in the summary."""
    written = []
    if result.header:
        path = out / f"{result.name}.csv"
        write_csv(path, result.header, result.rows, cfg_hash, seed)
        written.append(path)
    for key, value in result.summary.items():
        if isinstance(value, dict) and "header" in value and "rows" in value:
            if key == "gamma_sweeps":
                by_problem: dict = {}
                for row in value["rows"]:
                    by_problem.setdefault(row[0], []).append(row[1:])
                for pid, rows in by_problem.items():
                    path = out / f"gamma_sweep_{pid}.csv"
                    write_csv(path, ("tau", "distance", "monotone_flag"),
                              rows, cfg_hash, seed)
                    written.append(path)
            else:
                path = out / f"{key}.csv"
                write_csv(path, value["header"], value["rows"], cfg_hash, seed)
                written.append(path)
    return written


def _summary_doc(cfg: ExperimentConfig, results: list, cfg_hash: str) -> dict:
    def strip_tables(summary: dict) -> dict:
        out = {}
        for k, v in summary.items():
            if isinstance(v, dict) and "rows" in v:
                out[k] = {kk: vv for kk, vv in v.items() if kk not in ("rows", "header")}
            else:
                out[k] = v
        return out

    return {
        "config": cfg.semantic(),
        "config_hash": cfg_hash,
        "verdicts": [
            {"criterion": v.criterion, "passed": v.passed, "detail": v.detail}
            for r in results for v in r.verdicts
        ],
        "studies": {r.name: strip_tables(r.summary) for r in results},
    }


def run(cfg: ExperimentConfig) -> int:
    cfg = cfg.validate()
    out_root = Path(cfg.out)
    try:
        out_root.mkdir(parents=True, exist_ok=True)
        probe = out_root / ".write-probe"
        probe.write_text("")
        probe.unlink()
    except OSError as exc:
        raise ConfigError(f"output directory {out_root} not writable: {exc}") from None

    started = time.monotonic()
    names = [cfg.subcommand] if cfg.subcommand != "all" else list(_RUNNERS)
    all_results = []
    for name in names:
        sub_cfg = replace(cfg, subcommand=name)
        sub_hash = config_hash(sub_cfg.semantic())
        results = _RUNNERS[name](sub_cfg)
        out_dir = out_root / name if cfg.subcommand == "all" else out_root
        for result in results:
            _emit_study(result, out_dir, sub_hash, cfg.seed)
        write_json(out_dir / "summary.json", _summary_doc(sub_cfg, results, sub_hash))
        all_results.extend(results)

    if cfg.subcommand == "all":
        top_hash = config_hash(cfg.semantic())
        write_json(out_root / "summary.json",
                   _summary_doc(cfg, all_results, top_hash))

    verdicts = [v for r in all_results for v in r.verdicts]
    for v in verdicts:
        print(studies.verdict_line(v))
    failed = [v for v in verdicts if not v.passed]
    elapsed = time.monotonic() - started
    print(f"{cfg.subcommand}: {len(verdicts) - len(failed)}/{len(verdicts)} criteria "
          f"passed in {elapsed:.1f}s; reports in {out_root}/")
    if failed:
        print("failed criteria: " + ", ".join(v.criterion for v in failed),
              file=sys.stderr)
        return 1
    return 0


# ---------------------------------------------------------------------------
# Argument parsing

def _parse_tau_grid(text: str):
    try:
        return tuple(float(p) for p in text.split(","))
    except ValueError:
        raise argparse.ArgumentTypeError(f"bad tau grid {text!r}") from None


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="ceres",
        description="Causal-estimation studies verified against exact oracles.",
    )
    sub = parser.add_subparsers(dest="subcommand", required=True)
    for name, doc in (
        ("backdoor-exp", "backdoor identity sweep plus the softmax-swap gap study"),
        ("frontdoor-exp", "front-door identity sweep, mediator robustness, gate contract"),
        ("qp-verify", "attention-as-optimum oracles and the temperature sweep"),
        ("membank-exp", "memory-bank weight bounds and convergence rates"),
        ("nwgm-gap", "exactness conditions for the softmax-swap approximation"),
        ("all", "run every study (full acceptance suite)"),
    ):
        p = sub.add_parser(name, help=doc)
        p.add_argument("--seed", type=int, default=None, help="master seed (default 0)")
        p.add_argument("--config", type=str, default=None,
                       help="JSON config file; explicit flags override its values")
        p.add_argument("--out", type=str, default=None,
                       help="output directory (default ceres-out)")
        p.add_argument("--trials", type=int, default=None,
                       help="sweep size / seed count (default 200)")
        p.add_argument("--window", type=int, default=None,
                       help="memory window W (default 5)")
        p.add_argument("--kappa", type=float, default=None,
                       help="similarity clamp (default 1.0)")
        p.add_argument("--rho", type=float, default=None,
                       help="mediator corruption strength (default 0.5)")
        p.add_argument("--tau-grid", type=_parse_tau_grid, default=None,
                       metavar="a,b,c", help="descending temperatures (default 1,0.3,0.1,0.03,0.01)")
        p.add_argument("--tol", type=float, default=None,
                       help="identity tolerance (default 1e-12)")
        p.add_argument("--jobs", type=int, default=None,
                       help="worker processes (default: logical core count)")
    return parser


def _config_from_args(args) -> ExperimentConfig:
    file_values: dict = {}
    if args.config:
        try:
            with open(args.config, "r", encoding="utf-8") as fh:
                file_values = json.load(fh)
        except (OSError, json.JSONDecodeError) as exc:
            raise ConfigError(f"cannot read config file {args.config}: {exc}") from None
        if not isinstance(file_values, dict):
            raise ConfigError("config file must hold a JSON object")
        known = {f.name for f in fields(ExperimentConfig)}
        unknown = set(file_values) - known
        if unknown:
            raise ConfigError(f"unknown config keys: {sorted(unknown)}")

    merged = dict(file_values)
    merged["subcommand"] = args.subcommand
    for key in ("seed", "out", "trials", "window", "kappa", "rho", "tol", "jobs"):
        value = getattr(args, key)
        if value is not None:
            merged[key] = value
    if args.tau_grid is not None:
        merged["tau_grid"] = args.tau_grid
    if "tau_grid" in merged:
        merged["tau_grid"] = tuple(float(t) for t in merged["tau_grid"])
    try:
        return ExperimentConfig(**merged)
    except TypeError as exc:
        raise ConfigError(str(exc)) from None


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        cfg = _config_from_args(args).validate()
        return run(cfg)
    except ConfigError as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return 2
    except OSError as exc:
        print(f"config error: cannot read required file: {exc}", file=sys.stderr)
        return 2
    except CeresError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1


if __name__ == "__main__":
    sys.exit(main())
