"""Experiment orchestration: config handling, subcommands, file emission.

Subcommands: region | plan | calc | simulate | sweep.  Options come from
an optional JSON config file plus command-line flags; flags win.  Every
run writes a ``config.json`` manifest next to its outputs and all
emitters are deterministic, so a rerun with the same seed reproduces
files byte for byte.  ``DOFLAB_OUT`` sets the default output directory.
"""

from __future__ import annotations

import argparse
import csv
import dataclasses
import json
import os
import sys
from dataclasses import dataclass
from pathlib import Path

from . import dofcalc, region, scheduler, simlink
from .errors import DomainError
from .model import CsitQuality

OUT_ENV_VAR = "DOFLAB_OUT"


@dataclass(frozen=True)
class ExperimentConfig:
    """One experiment's full parameter set (mirrors module preconditions)."""

    alpha1: float = 0.5
    alpha2: float = 0.2
    scheme: str = "x1"
    delta: float | None = None
    phases: int = 8
    t1: int = 8
    snr_min_db: float = 30.0
    snr_max_db: float = 80.0
    snr_points: int = 6
    trials: int = 1000
    seed: int = 0
    out_dir: str = "."
    grid_step: float = 0.1

    def __post_init__(self):
        if not (0.0 <= self.alpha2 <= self.alpha1 <= 1.0):
            raise DomainError(
                f"quality ordering violated: need 1 >= alpha1 >= alpha2 >= 0, "
                f"got ({self.alpha1}, {self.alpha2})"
            )
        if self.scheme not in ("x1", "x2", "x3"):
            raise DomainError(f"scheme must be one of x1|x2|x3, got {self.scheme!r}")
        if self.phases < 3:
            raise DomainError(f"phases must be >= 3, got {self.phases}")
        if self.t1 < 1:
            raise DomainError(f"t1 must be >= 1, got {self.t1}")
        if self.snr_points < 3:
            raise DomainError(f"snr_points must be >= 3, got {self.snr_points}")
        if self.snr_min_db < 0.0:
            raise DomainError(
                f"snr_min_db must be >= 0 dB (unit channel power), got {self.snr_min_db}"
            )
        if self.snr_max_db - self.snr_min_db < 30.0:
            raise DomainError("SNR range must span at least 30 dB (3 decades)")
        if self.trials < 1:
            raise DomainError(f"trials must be >= 1, got {self.trials}")
        if not (0.0 < self.grid_step <= 0.5):
            raise DomainError(f"grid_step must be in (0, 0.5], got {self.grid_step}")

    @property
    def quality(self) -> CsitQuality:
        return CsitQuality(self.alpha1, self.alpha2)

    def to_dict(self) -> dict:
        return dataclasses.asdict(self)

    @classmethod
    def from_dict(cls, data: dict) -> "ExperimentConfig":
        known = {f.name for f in dataclasses.fields(cls)}
        unknown = set(data) - known
        if unknown:
            raise DomainError(f"unknown config keys: {sorted(unknown)}")
        return cls(**data)


def load_config(path: str | None, overrides: dict) -> ExperimentConfig:
    """Config file values overridden by explicit flags (flags win)."""
    data: dict = {}
    if path is not None:
        with open(path) as fh:
            data = json.load(fh)
    data.update({k: v for k, v in overrides.items() if v is not None})
    return ExperimentConfig.from_dict(data)


def _write_json(path: Path, payload: dict) -> Path:
    with open(path, "w") as fh:
        json.dump(payload, fh, indent=2, sort_keys=True)
        fh.write("\n")
    return path


def _write_manifest(cfg: ExperimentConfig, out: Path) -> Path:
    return _write_json(out / "config.json", cfg.to_dict())


def _out_dir(cfg: ExperimentConfig) -> Path:
    out = Path(cfg.out_dir)
    out.mkdir(parents=True, exist_ok=True)
    return out


def _build_plan(cfg: ExperimentConfig) -> scheduler.PhasePlan:
    quality = cfg.quality
    if cfg.scheme == "x1":
        delta = cfg.delta if cfg.delta is not None else scheduler.default_delta(quality)
        return scheduler.plan_x1(quality, delta, S=cfg.phases, T1=cfg.t1)
    if cfg.scheme == "x2":
        return scheduler.plan_x2(quality, S=cfg.phases, T1=cfg.t1)
    return scheduler.plan_x3(quality)


def cmd_region(cfg: ExperimentConfig) -> list[Path]:
    out = _out_dir(cfg)
    reg = region.corners(cfg.quality)
    files = [_write_json(out / "region.json", reg.to_json_dict())]
    samples = region.boundary_samples(reg)
    with open(out / "region_boundary.csv", "w", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(["d1", "d2"])
        for d1, d2 in samples:
            writer.writerow([repr(float(d1)), repr(float(d2))])
    files.append(out / "region_boundary.csv")
    files.append(_write_manifest(cfg, out))
    return files


def cmd_plan(cfg: ExperimentConfig) -> list[Path]:
    out = _out_dir(cfg)
    plan = _build_plan(cfg)
    report = scheduler.validate_plan(plan)
    if not report.valid:
        raise DomainError(f"constructed plan failed validation: {report}")
    files = [_write_json(out / "plan.json", scheduler.plan_to_json_dict(plan))]
    files.append(_write_manifest(cfg, out))
    return files


def cmd_calc(cfg: ExperimentConfig) -> list[Path]:
    """Accounting CSV: one convergence row per phase count up to the configured S."""
    out = _out_dir(cfg)
    rows = []
    if cfg.scheme == "x3":
        plan = _build_plan(cfg)
        rows.append(dofcalc.account_csv_row(plan, dofcalc.achieved_dof(plan)))
    else:
        for s in range(3, cfg.phases + 1):
            sub = dataclasses.replace(cfg, phases=s)
            plan = _build_plan(sub)
            rows.append(dofcalc.account_csv_row(plan, dofcalc.achieved_dof(plan)))
    dofcalc.write_accounts_csv(out / "dofcalc.csv", rows)
    return [out / "dofcalc.csv", _write_manifest(cfg, out)]


def cmd_simulate(cfg: ExperimentConfig) -> list[Path]:
    out = _out_dir(cfg)
    plan = _build_plan(cfg)
    trial_cfg = simlink.TrialConfig(
        plan=plan,
        snr_grid=simlink.make_snr_grid(cfg.snr_min_db, cfg.snr_max_db, cfg.snr_points),
        trials=cfg.trials,
        seed=cfg.seed,
    )
    report = simlink.run_campaign(trial_cfg)
    files = [_write_json(out / "linkreport.json", report.to_json_dict())]
    simlink.write_link_csv(out / "linkreport.csv", report)
    files.append(out / "linkreport.csv")
    files.append(_write_manifest(cfg, out))
    return files


SWEEP_CSV_HEADER = [
    "alpha1", "alpha2", "case", "area",
    "hausdorff_finite", "hausdorff_asymptotic", "monotone_ok",
]


def cmd_sweep(cfg: ExperimentConfig) -> list[Path]:
    """Coverage and monotonicity over the (alpha1, alpha2) grid."""
    out = _out_dir(cfg)
    step = cfg.grid_step
    n = int(round(1.0 / step))
    values = [round(i * step, 12) for i in range(n + 1)]
    rows = []
    for a1 in values:
        for a2 in values:
            if a2 > a1:
                continue
            q = CsitQuality(a1, a2)
            cov = dofcalc.region_coverage(q, S=cfg.phases, T1=cfg.t1)
            reg = region.corners(q)
            monotone_ok = True
            for b1, b2 in ((round(a1 + step, 12), a2), (a1, round(a2 + step, 12))):
                if b1 > 1.0 or b2 > b1:
                    continue
                bigger = CsitQuality(b1, b2)
                if not all(
                    region.contains(bigger, c, 1e-12) for c in reg.corners
                ):
                    monotone_ok = False
            rows.append([
                a1, a2, cov.case_tag, repr(reg.area()),
                repr(cov.hausdorff_finite), repr(cov.hausdorff_asymptotic),
                monotone_ok,
            ])
    with open(out / "sweep.csv", "w", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(SWEEP_CSV_HEADER)
        writer.writerows(rows)
    return [out / "sweep.csv", _write_manifest(cfg, out)]


_COMMANDS = {
    "region": cmd_region,
    "plan": cmd_plan,
    "calc": cmd_calc,
    "simulate": cmd_simulate,
    "sweep": cmd_sweep,
}


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="doflab",
        description="DoF laboratory for the two-user MISO BC with unequal mixed CSIT",
    )
    sub = parser.add_subparsers(dest="command", required=True)
    for name in _COMMANDS:
        p = sub.add_parser(name)
        p.add_argument("--config", type=str, default=None, help="JSON config file")
        p.add_argument("--alpha1", type=float, default=None)
        p.add_argument("--alpha2", type=float, default=None)
        p.add_argument("--delta", type=float, default=None)
        p.add_argument("--scheme", choices=["x1", "x2", "x3"], default=None)
        p.add_argument("--phases", type=int, default=None, help="number of phases S")
        p.add_argument("--t1", type=int, default=None, help="phase-1 duration")
        p.add_argument("--snr-min-db", dest="snr_min_db", type=float, default=None)
        p.add_argument("--snr-max-db", dest="snr_max_db", type=float, default=None)
        p.add_argument("--snr-points", dest="snr_points", type=int, default=None)
        p.add_argument("--trials", type=int, default=None)
        p.add_argument("--seed", type=int, default=None)
        p.add_argument("--out", dest="out_dir", type=str, default=None)
        p.add_argument("--grid-step", dest="grid_step", type=float, default=None)
    return parser


def main(argv: list[str] | None = None) -> int:
    args = build_parser().parse_args(argv)
    overrides = {
        k: v
        for k, v in vars(args).items()
        if k not in ("command", "config")
    }
    if overrides.get("out_dir") is None:
        overrides["out_dir"] = os.environ.get(OUT_ENV_VAR)
    try:
        cfg = load_config(args.config, overrides)
        files = _COMMANDS[args.command](cfg)
    except DomainError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2
    for path in files:
        print(path)
    return 0


if __name__ == "__main__":
    sys.exit(main())
