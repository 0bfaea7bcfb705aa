"""Command-line entry point: ``phasefilter <command> [config.json] [--set path=value ...]``.

Exit codes: 0 success, 1 invalid configuration, 2 numerical-health failure
(including a failed ``verify`` check).
"""

from __future__ import annotations

import argparse
import csv
import json
import logging
import sys
from dataclasses import replace
from importlib import resources
from pathlib import Path
from typing import Optional, Sequence

import numpy as np

from . import __version__
from .checks import run_suite
from .config import ConfigError, build, build_drive, gaussian_settings, load, output_dir
from .filters import NumericalHealthError
from .gaussian import GaussianBelief, run_gaussian
from .operators import trace_distance
from .trajectories import (
    Scheme,
    collapse_statistics,
    ensemble_average,
    estimation_run,
    simulate,
    trajectory_rng,
)

log = logging.getLogger("phasefilter")

EXIT_OK, EXIT_CONFIG, EXIT_HEALTH = 0, 1, 2
COMMANDS = ("simulate", "ensemble", "estimate", "gaussian", "collapse", "verify")


def reference_config_path() -> Path:
    return Path(str(resources.files("phasefilter") / "data" / "reference_dim2.json"))


def _fmt(x) -> str:
    return format(float(x), ".17g")


def write_csv(path: Path, columns: dict) -> None:
    keys = list(columns)
    n = len(next(iter(columns.values())))
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(keys)
        for i in range(n):
            w.writerow([_fmt(columns[k][i]) for k in keys])


def _jsonable(obj):
    if isinstance(obj, dict):
        return {str(k): _jsonable(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple)):
        return [_jsonable(v) for v in obj]
    if isinstance(obj, np.ndarray):
        return _jsonable(obj.tolist())
    if isinstance(obj, (np.floating, float)):
        return float(obj)
    if isinstance(obj, (np.integer,)):
        return int(obj)
    if isinstance(obj, (complex, np.complexfloating)):
        return {"re": float(obj.real), "im": float(obj.imag)}
    if isinstance(obj, (np.bool_,)):
        return bool(obj)
    return obj


def write_json(path: Path, payload: dict) -> None:
    with open(path, "w") as fh:
        json.dump(_jsonable(payload), fh, indent=2, sort_keys=True)
        fh.write("\n")


class Runner:
    def __init__(self, command: str, doc: dict, out: Path):
        self.command = command
        self.doc = doc
        self.out = out
        self.formats = set(doc["output"]["formats"])

    def emit(self, name: str, columns: Optional[dict], summary: dict) -> dict:
        self.out.mkdir(parents=True, exist_ok=True)
        if columns is not None and "csv" in self.formats:
            write_csv(self.out / f"{name}.csv", columns)
        payload = {
            "command": self.command,
            "version": __version__,
            "config": self.doc,
            "seed": self.doc["seed"],
            **summary,
        }
        if "json" in self.formats:
            write_json(self.out / f"{name}_summary.json", payload)
        return payload

    # ----- commands -----

    def simulate(self) -> dict:
        built = build(self.doc)
        traj = simulate(built.trajectory)
        return self.emit(
            "trajectory",
            traj.columns(),
            {
                "final": {
                    "t": traj.t[-1],
                    "Y": traj.Y[-1],
                    "I": traj.I[-1],
                    "mean_q": traj.mean_q[-1],
                    "purity": traj.purity[-1],
                    "eigen_weights": traj.eigen_weights[-1],
                },
                "health": _health(traj.min_eig, traj.trace_err),
            },
        )

    def ensemble(self) -> dict:
        built = build(self.doc)
        M = self.doc["ensemble_size"]
        cmp_ = ensemble_average(built.trajectory, M, workers=self.doc["workers"])
        ens = cmp_.ensemble
        cols = {"t": ens.times, "trace_distance_to_master_equation": cmp_.distances}
        for a, val in enumerate(ens.eigenvalues):
            cols[f"mean_weight_{a}"] = ens.mean_weights[:, a]
        T = built.trajectory.n_steps * built.trajectory.dt
        return self.emit(
            "ensemble",
            cols,
            {
                "M": M,
                "max_trace_distance": cmp_.max_distance,
                "innovations": {
                    "mean_I_T": float(np.mean(ens.I_T)),
                    "std_error_I_T": float(np.std(ens.I_T, ddof=1) / np.sqrt(M)) if M > 1 else None,
                    "bound_3sqrt_T_over_M": 3 * np.sqrt(T / M),
                    "mean_quadratic_variation": float(np.mean(ens.quadratic_variation)),
                },
                "health": {"worst_min_eig": ens.worst_min_eig, "worst_trace_err": ens.worst_trace_err},
            },
        )

    def estimate(self) -> dict:
        built = build(self.doc)
        if built.filter_initial_state is None:
            raise ConfigError("estimate needs filter_initial_state")
        truth, est = estimation_run(built.trajectory)
        cols = {"t": truth.t}
        for prefix, tr in (("truth", truth), ("filter", est)):
            for key, val in tr.columns().items():
                if key != "t":
                    cols[f"{prefix}_{key}"] = val
        return self.emit(
            "estimate",
            cols,
            {
                "final_trace_distance": trace_distance(truth.final_state, est.final_state),
                "final_mean_q": {"truth": truth.mean_q[-1], "filter": est.mean_q[-1]},
                "health": _health(np.minimum(truth.min_eig, est.min_eig), np.maximum(truth.trace_err, est.trace_err)),
            },
        )

    def gaussian(self) -> dict:
        doc = self.doc
        g = gaussian_settings(doc)
        dt, T = doc["dt"], doc["T"]
        n = int(round(T / dt))
        stride = doc["output"]["stride"]
        if g["paired"]:
            built = build(doc)
            model, cfg = built.model, built.trajectory
            if model.position is None:
                raise ConfigError("gaussian.paired needs the oscillator phase model")
            if cfg.scheme is not Scheme.HOMODYNE:
                raise ConfigError("gaussian.paired needs the homodyne scheme")
            cfg.record_stride = 1
            traj = simulate(cfg)
            belief = GaussianBelief.from_state(cfg.initial_state, model.position, model.momentum, g["k"], model.hbar)
            explicit = {key: g[key] for key in ("mean_q", "mean_p", "V", "C", "W") if key in g}
            belief = replace(belief, **explicit)
            dI = np.diff(traj.I)
        else:
            belief = _belief_from_block(g)
            dI = trajectory_rng(doc["seed"], 0).standard_normal(n) * np.sqrt(dt)
        betas = build_drive(doc).sample(dt, n)
        out = run_gaussian(belief, dI, betas, dt, g["form"], stride=1)
        keep = np.unique(np.r_[np.arange(0, n + 1, stride), n])
        cols = {k: v[keep] for k, v in out.items()}
        summary = {"form": g["form"].value, "final": {k: v[-1] for k, v in out.items()}}
        if g["paired"]:
            cols["sme_mean_q"] = traj.mean_q[keep]
            cols["sme_var_q"] = traj.var_q[keep]
            scale = np.maximum(np.abs(out["mean_q"]), np.sqrt(np.abs(out["V"])))
            final_sme = GaussianBelief.from_state(traj.final_state, model.position, model.momentum, g["k"], model.hbar)
            summary["paired"] = {
                "max_rel_mean_error": float(np.max(np.abs(out["mean_q"] - traj.mean_q) / scale)),
                "max_rel_var_error": float(np.max(np.abs(out["V"] - traj.var_q) / out["V"])),
                "sme_final_moments": {"V": final_sme.V, "C": final_sme.C, "W": final_sme.W},
                "health": _health(traj.min_eig, traj.trace_err),
            }
        return self.emit("gaussian", cols, summary)

    def collapse(self) -> dict:
        built = build(self.doc)
        threshold = self.doc.get("collapse", {}).get("threshold", 0.99)
        M = self.doc["ensemble_size"]
        rep = collapse_statistics(built.trajectory, M, threshold, workers=self.doc["workers"])
        cols = {"t": rep.times}
        for a in range(rep.eigenvalues.size):
            cols[f"mean_weight_{a}"] = rep.mean_weights[:, a]
            cols[f"std_error_{a}"] = rep.weight_std_err[:, a]
        tol = rep.tolerance()
        return self.emit(
            "collapse",
            cols,
            {
                "M": M,
                "threshold": threshold,
                "eigenvalues": rep.eigenvalues,
                "expected": rep.expected,
                "frequencies": rep.frequencies,
                "tolerance": tol,
                "within_tolerance": bool(np.all(np.abs(rep.frequencies - rep.expected) <= tol)),
                "unclassified": rep.unclassified,
                "martingale_deviation_in_std_errors": rep.martingale_deviation(),
            },
        )

    def verify(self) -> dict:
        built = build(self.doc)
        quick = self.doc.get("verify", {}).get("quick", True)
        beta = built.drive.segments[0][2]
        results = run_suite(
            built.model,
            built.initial_state,
            beta,
            quick=quick,
            seed=self.doc["seed"],
            progress=lambda r: log.info(r.line()),
        )
        payload = self.emit(
            "verify",
            None,
            {"checks": [r.as_dict() for r in results], "all_passed": all(r.passed for r in results)},
        )
        return payload


def _belief_from_block(g: dict) -> GaussianBelief:
    if "V" not in g:
        raise ConfigError("gaussian.V is required for an unpaired run")
    mq, mp, c = g.get("mean_q", 0.0), g.get("mean_p", 0.0), g.get("C", 0.0)
    if "W" in g:
        return GaussianBelief(mq, mp, g["V"], c, g["W"], g["k"])
    return GaussianBelief.minimum_uncertainty(g["V"], g["k"], 1.0, mq, mp, c)


def _health(min_eig, trace_err) -> dict:
    return {"worst_min_eig": float(np.min(min_eig)), "worst_trace_err": float(np.max(trace_err))}


def build_parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(prog="phasefilter", description="Quantum filtering of an interferometer phase.")
    p.add_argument("command", choices=COMMANDS)
    p.add_argument("config", nargs="?", help="JSON run config (verify defaults to the bundled reference)")
    p.add_argument("--set", dest="overrides", action="append", default=[], metavar="PATH=VALUE",
                   help="override a config entry by dotted path, e.g. drive.0.re=2.0")
    p.add_argument("--out", help="output directory (default: config output.dir, then $PHASEFILTER_OUTPUT_DIR)")
    p.add_argument("-v", "--verbose", action="store_true")
    return p


def main(argv: Optional[Sequence[str]] = None) -> int:
    args = build_parser().parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING, format="%(message)s")
    path = args.config
    if path is None:
        if args.command != "verify":
            print("error: a config file is required", file=sys.stderr)
            return EXIT_CONFIG
        path = reference_config_path()
    try:
        doc = load(path, args.overrides)
        runner = Runner(args.command, doc, output_dir(doc, args.out))
        payload = getattr(runner, args.command)()
    except ConfigError as exc:
        print(f"invalid configuration: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except NumericalHealthError as exc:
        out = output_dir(doc, args.out)
        out.mkdir(parents=True, exist_ok=True)
        write_json(out / "health_report.json", {"command": args.command, "error": str(exc), "config": doc})
        print(f"numerical health failure: {exc}", file=sys.stderr)
        return EXIT_HEALTH
    if args.command == "verify":
        for item in payload["checks"]:
            flag = "PASS" if item["passed"] else "FAIL"
            print(f"[{flag}] {item['name']}: {item['measured']:.3e} (tol {item['tolerance']:.1e})")
        return EXIT_OK if payload["all_passed"] else EXIT_HEALTH
    print(f"wrote {args.command} output to {runner.out}")
    return EXIT_OK


if __name__ == "__main__":
    sys.exit(main())
