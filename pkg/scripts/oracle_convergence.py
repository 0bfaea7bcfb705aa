"""Homodyne filter vs the repeated-interaction oracle as the slice duration shrinks."""

import argparse
import json

import numpy as np

from phasefilter.filters import HomodyneIntegrator
from phasefilter.interferometer import InterferometerModel
from phasefilter.oracle import CONVERGENCE_TAUS, convergence_study
from phasefilter.trajectories import Scheme


def main():
    p = argparse.ArgumentParser(description=__doc__)
    p.add_argument("--taus", type=float, nargs="+", default=list(CONVERGENCE_TAUS))
    p.add_argument("--horizon", type=float, default=0.25)
    p.add_argument("--steps", type=int, default=None, help="fixed step count instead of a fixed horizon")
    p.add_argument("--repeats", type=int, default=50)
    p.add_argument("--beta", type=float, default=1.0)
    p.add_argument("--seed", type=int, default=20240601)
    p.add_argument("--integrator", choices=[i.value for i in HomodyneIntegrator], default="kraus")
    args = p.parse_args()

    model = InterferometerModel(np.diag([0.0, np.pi]))
    rho0 = np.full((2, 2), 0.5, dtype=complex)
    study = convergence_study(
        model, Scheme.HOMODYNE, args.beta, rho0, args.taus,
        steps=args.steps, horizon=args.horizon, repeats=args.repeats, seed=args.seed,
        integrator=HomodyneIntegrator(args.integrator),
    )
    label = args.integrator
    print(json.dumps({
        "taus": study.taus.tolist(),
        "mean_max_deviation": study.deviations[label].tolist(),
        "std_error": study.std_errors[label].tolist(),
        "ratios": study.ratios(label).tolist(),
        "worst_min_eig": study.worst_min_eig,
        "worst_trace_err": study.worst_trace_err,
    }, indent=2))


if __name__ == "__main__":
    main()
