"""Settling frequencies of long homodyne runs against the initial eigenweights."""

import argparse
import json

import numpy as np

from phasefilter.interferometer import InterferometerModel
from phasefilter.trajectories import CoherentAmplitude, Scheme, TrajectoryConfig, collapse_statistics


def main():
    p = argparse.ArgumentParser(description=__doc__)
    p.add_argument("--phases", type=float, nargs="+", default=[0.0, np.pi])
    p.add_argument("--weights", type=float, nargs="+", default=[0.3, 0.7])
    p.add_argument("--T", type=float, default=20.0)
    p.add_argument("--dt", type=float, default=1e-3)
    p.add_argument("--M", type=int, default=2000)
    p.add_argument("--beta", type=float, default=1.0)
    p.add_argument("--threshold", type=float, default=0.99)
    p.add_argument("--workers", type=int, default=1)
    p.add_argument("--seed", type=int, default=20240601)
    args = p.parse_args()

    cfg = TrajectoryConfig(
        model=InterferometerModel(np.diag(args.phases)),
        drive=CoherentAmplitude.constant(args.beta, args.T),
        scheme=Scheme.HOMODYNE,
        dt=args.dt,
        T=args.T,
        seed=args.seed,
        initial_state=np.diag(args.weights),
        record_stride=max(1, int(round(1.0 / args.dt))),
    )
    rep = collapse_statistics(cfg, args.M, args.threshold, workers=args.workers)
    print(json.dumps({
        "eigenvalues": rep.eigenvalues.tolist(),
        "expected": rep.expected.tolist(),
        "frequencies": rep.frequencies.tolist(),
        "tolerance": rep.tolerance().tolist(),
        "unclassified": rep.unclassified,
        "martingale_deviation_in_std_errors": rep.martingale_deviation(),
        "mean_weights_over_time": rep.mean_weights.tolist(),
    }, indent=2))


if __name__ == "__main__":
    main()
