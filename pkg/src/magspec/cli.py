"""Command line entry point: ``magspec {constants,expand,solve,sweep,trial}``.

Exit codes: 0 success, 1 numerical failure, 2 usage or configuration error,
3 geometric hypothesis failure (degenerate curvature maximum).
"""

from __future__ import annotations

import argparse
import csv
import json
import sys
import warnings
from dataclasses import replace
from pathlib import Path

from . import effective, harness, model1d
from .config import SUBCOMMANDS, RunConfig
from .errors import ConfigError, MagspecError
from .geometry import parse_curve, profile, strip_metric
from .solver2d import DiscProblem, GridPolicy, StripProblem, assemble_strip, default_workers, disc_solve, lowest_eigs

# flags with their own spelling; every other config key is exposed as --<key>
_ALIASES = {"out": "--out", "curve": "--curve", "h": "--h", "level": "--level", "threads": "--threads"}


def build_parser() -> argparse.ArgumentParser:
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--config", metavar="PATH", help="flat key = value config file")
    common.add_argument("--dump-config", metavar="PATH", help="write the effective config and continue")
    common.add_argument("--disc", metavar="R", help="solve on the disc of radius R (solve only); 'R=1' or '1'")
    for key in RunConfig.keys():
        if key == "command":
            continue
        flag = _ALIASES.get(key, f"--{key}")
        common.add_argument(flag, dest=key, metavar=key.split(".")[-1].upper(), default=None)
    parser = argparse.ArgumentParser(prog="magspec", description=__doc__.splitlines()[0])
    sub = parser.add_subparsers(dest="command", required=True)
    helps = {
        "constants": "half-line model constants and identity residuals",
        "expand": "asymptotic eigenvalue expansion table",
        "solve": "direct eigensolve on the boundary strip or the disc",
        "sweep": "h-sweep with regression against the expansion",
        "trial": "Rayleigh quotient of the Gaussian trial state",
    }
    for name in SUBCOMMANDS:
        sub.add_parser(name, parents=[common], help=helps[name])
    return parser


def load_config(args) -> RunConfig:
    base = RunConfig(command=args.command)
    cfg = RunConfig.load(args.config, base) if args.config else base
    cfg = replace(cfg, command=args.command)
    overrides = {k: v for k, v in vars(args).items() if k in RunConfig.keys() and k != "command" and v is not None}
    if args.disc is not None:
        overrides["disc.R"] = args.disc.split("=", 1)[-1]
    return cfg.updated(overrides)


class _Out:
    """Output directory plus manifest of written files."""

    def __init__(self, path):
        self.dir = Path(path)
        try:
            self.dir.mkdir(parents=True, exist_ok=True)
            probe = self.dir / ".write_probe"
            probe.write_text("")
            probe.unlink()
        except OSError as exc:
            raise ConfigError(f"output directory {self.dir} is not writable: {exc}") from exc
        self.files = []

    def path(self, name):
        p = self.dir / name
        self.files.append(p)
        return p

    def add(self, paths):
        self.files.extend(Path(p) for p in paths)

    def finish(self):
        man = self.dir / "manifest.txt"
        man.write_text("".join(f"{p}\n" for p in self.files))
        for p in self.files:
            print(f"wrote {p}")
        print(f"wrote {man}")


def _constants(cfg):
    return model1d.reference_constants(cfg.grid_L, cfg.grid_n)


def _geometry(cfg):
    prof = profile(parse_curve(cfg.curve, cfg.samples))
    return prof, strip_metric(prof, cfg.strip_t0)


def _policy(cfg):
    return GridPolicy(cfg.strip_ds_scale, cfg.strip_dtau, cfg.strip_richardson)


def _workers(cfg):
    return cfg.threads or default_workers()


def cmd_constants(cfg, out) -> int:
    c = model1d.model_constants(model1d.HalfLineGrid(cfg.grid_L, cfg.grid_n))
    model1d.write_constants_json(c, out.path("constants.json"))
    model1d.write_u0_csv(c, out.path("u0.csv"))
    res = model1d.identity_residuals(c)
    print(f"theta0 = {c.theta0:.10f}  xi0 = {c.xi0:.10f}  C1 = {c.C1:.10f}  I2 = {c.I2:.10f}")
    failed = []
    for name, r in res.items():
        tol = cfg.tol_fd if name.startswith("mu''") else cfg.tol_id
        ok = abs(r) <= tol
        print(f"  {name:28s} {r: .3e}  {'ok' if ok else 'FAILED'} (tol {tol:g})")
        if not ok:
            failed.append(name)
    out.finish()
    if failed:
        print(f"error: identities outside tolerance: {', '.join(failed)}", file=sys.stderr)
        return 1
    return 0


def cmd_expand(cfg, out) -> int:
    mc = _constants(cfg)
    prof = profile(parse_curve(cfg.curve, cfg.samples))
    levels = range(1, cfg.level + 1)
    rows = effective.expansion_table(levels, cfg.h, mc, prof)
    effective.write_table_csv(rows, out.path("expansion.csv"))
    effective.write_table_json(rows, effective.coefficients(mc, prof), out.path("expansion.json"))
    print(f"{'h':>8} {'n':>3} {'value':>16}  order")
    for h, n, v, o in rows:
        print(f"{h:8.4g} {n:3d} {v:16.10e}  {o}")
    out.finish()
    return 0


def cmd_solve(cfg, out) -> int:
    rows = []
    if cfg.disc_R is not None:
        for h in cfg.h:
            r = disc_solve(DiscProblem(h, cfg.disc_R, cfg.disc_b, nr=cfg.disc_nr), cfg.solve_k, _workers(cfg))
            _write_json(out.path(f"solve_disc_h{h:g}.json"), r.to_dict())
            rows += [(h, i + 1, v, res, m) for i, (v, res, m) in enumerate(zip(r.eigenvalues, r.residual_norms, r.labels))]
        header = ["h", "index", "eigenvalue", "residual", "m"]
    else:
        mc = _constants(cfg)
        prof, metric = _geometry(cfg)
        prof.to_csv(out.path("profile.csv"))
        for h in cfg.h:
            p = StripProblem.from_policy(h, metric, _policy(cfg), cfg.strip_fold)
            r = lowest_eigs(p, cfg.solve_k, richardson=cfg.strip_richardson, theta0=mc.theta0)
            _write_json(out.path(f"solve_h{h:g}.json"), r.to_dict())
            if cfg.solve_dump_matrix:
                assemble_strip(p).dump(out.path(f"matrix_h{h:g}.txt"))
            rows += [(h, i + 1, v, res, "") for i, (v, res) in enumerate(zip(r.eigenvalues, r.residual_norms))]
        header = ["h", "index", "eigenvalue", "residual", "label"]
    with open(out.path("solve.csv"), "w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(header)
        for h, i, v, res, lab in rows:
            w.writerow([repr(h), i, repr(float(v)), repr(float(res)), lab])
            print(f"h={h:<8g} mu{i} = {v:.10e}  residual {res:.1e}" + (f"  m={lab}" if lab != "" else ""))
    out.finish()
    return 0


def cmd_sweep(cfg, out) -> int:
    mc = _constants(cfg)
    prof, metric = _geometry(cfg)
    prof.to_csv(out.path("profile.csv"))
    rep = harness.run_sweep(metric, mc, cfg.h, _policy(cfg), _workers(cfg), cfg.strip_fold)
    out.add(harness.emit_report(rep, out.dir))
    print(harness.summary_table(rep), end="")
    out.finish()
    return 0


def cmd_trial(cfg, out) -> int:
    mc = _constants(cfg)
    prof, metric = _geometry(cfg)
    rows = []
    for h in cfg.h:
        bound, a_opt = effective.variational_bound(h, mc, metric)
        alpha = cfg.trial_alpha or a_opt
        e = harness.trial_energy(h, alpha, metric, mc, policy=_policy(cfg), fold=cfg.strip_fold,
                                 plateau=cfg.trial_plateau, clip_tol=cfg.trial_clip_tol)
        lost = harness.clipped_mass(h, alpha, metric, mc, cfg.strip_fold, cfg.trial_plateau)
        dev = (e - bound) / h ** 1.875
        rows.append({"h": h, "alpha": alpha, "trial_energy": e, "three_term": bound,
                     "deviation_h158": dev, "clipped_mass": lost})
        print(f"h={h:<8g} alpha={alpha:.6f} trial={e:.10e} three-term={bound:.10e} "
              f"(trial - three-term)/h^1.875={dev:+.4f} clipped={lost:.1e}")
        if cfg.trial_scan:
            alphas = [a_opt * f for f in (0.5, 0.6, 0.7, 0.8, 0.9, 1.0, 1.1, 1.25, 1.4, 1.6, 1.8, 2.0)]
            vals = harness.alpha_scan(h, alphas, metric, mc, policy=_policy(cfg), fold=cfg.strip_fold,
                                      plateau=cfg.trial_plateau, clip_tol=1.0)
            rows[-1]["scan"] = [{"alpha": a, "energy": float(v)} for a, v in zip(alphas, vals)]
    with open(out.path("trial.csv"), "w", newline="") as fh:
        keys = ["h", "alpha", "trial_energy", "three_term", "deviation_h158", "clipped_mass"]
        w = csv.writer(fh)
        w.writerow(keys)
        for r in rows:
            w.writerow([repr(r[k]) for k in keys])
    _write_json(out.path("trial.json"), {"version": 1, "rows": rows})
    out.finish()
    return 0


def _write_json(path, doc):
    with open(path, "w") as fh:
        json.dump(doc, fh, indent=2)
        fh.write("\n")


COMMANDS = {"constants": cmd_constants, "expand": cmd_expand, "solve": cmd_solve,
            "sweep": cmd_sweep, "trial": cmd_trial}


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        cfg = load_config(args)
        if args.dump_config:
            cfg.dump(args.dump_config)
        out = _Out(cfg.output_dir())
        with warnings.catch_warnings():
            warnings.simplefilter("default")
            return COMMANDS[cfg.command](cfg, out)
    except MagspecError as exc:
        print(f"error: {type(exc).__name__}: {exc}", file=sys.stderr)
        return exc.exit_code
    except OSError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1


if __name__ == "__main__":
    sys.exit(main())
