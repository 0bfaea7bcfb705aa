"""Which counting-gain denominator, 1 + <cos theta> or 1 + <cos^2 theta>, tracks the oracle."""

import argparse
import json

import numpy as np

from phasefilter.interferometer import InterferometerModel
from phasefilter.oracle import CONVERGENCE_TAUS, counting_adjudication


def main():
    p = argparse.ArgumentParser(description=__doc__)
    p.add_argument("--phases", type=float, nargs="+", default=[0.0, np.pi],
                   help="eigenvalues of theta (diagonal model)")
    p.add_argument("--taus", type=float, nargs="+", default=list(CONVERGENCE_TAUS))
    p.add_argument("--horizon", type=float, default=1.0)
    p.add_argument("--repeats", type=int, default=50)
    p.add_argument("--beta", type=float, default=1.0)
    p.add_argument("--seed", type=int, default=20240601)
    args = p.parse_args()

    d = len(args.phases)
    model = InterferometerModel(np.diag(args.phases))
    rho0 = np.full((d, d), 1.0 / d, dtype=complex)
    rep = counting_adjudication(model, args.beta, rho0, args.taus, args.horizon, args.repeats, args.seed)
    print(json.dumps(rep, indent=2))


if __name__ == "__main__":
    main()
