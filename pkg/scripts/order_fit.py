"""Fit contraction orders by ensemble regression.

Starting each instance at a random distance below --start gives the
spread in e0 that a log-log regression of e1 on e0 needs; a direct
3-point fit bottoms out at the arithmetic floor well before e2.
"""
import argparse

import numpy as np

from grqi import (
    SubspacePair,
    largest_principal_angle,
    nearby_subspace,
    newton_chatelin_step,
    orthonormalize,
    random_diagonalizable,
    trial_rng,
    tsgrqi_step,
)


def slope(x, y):
    return float(np.polyfit(np.log10(x), np.log10(y), 1)[0])


def main():
    ap = argparse.ArgumentParser(description=__doc__)
    ap.add_argument("--instances", type=int, default=100)
    ap.add_argument("--n", type=int, default=20)
    ap.add_argument("--p", type=int, default=5)
    ap.add_argument("--seed", type=int, default=77)
    ap.add_argument("--start", type=float, default=1e-2)
    args = ap.parse_args()

    e0s, e1s, n0s, n1s, h0s, h1s = [], [], [], [], [], []
    for t in range(args.instances):
        rng = trial_rng(args.seed, t)
        prob = random_diagonalizable(args.n, args.p, rng)
        vl, vr = prob.oracle_left, prob.oracle_right
        pair = SubspacePair(
            left=nearby_subspace(vl, args.start, rng),
            right=nearby_subspace(vr, args.start, rng),
        )
        e0s.append(
            largest_principal_angle(pair.left, vl)
            + largest_principal_angle(pair.right, vr)
        )
        pair, _ = tsgrqi_step(prob.matrix, pair)
        e1s.append(
            largest_principal_angle(pair.left, vl)
            + largest_principal_angle(pair.right, vr)
        )

        y = nearby_subspace(vr, args.start, rng)
        n0s.append(largest_principal_angle(y, vr))
        y = newton_chatelin_step(prob.matrix, y)
        n1s.append(largest_principal_angle(y, vr))

        q, _ = np.linalg.qr(rng.standard_normal((args.n, args.n)))
        d = rng.permutation(np.arange(1.0, args.n + 1.0))
        a = (q * d) @ q.T
        vh = orthonormalize(q[:, : args.p])
        y = nearby_subspace(vh, args.start, rng)
        h0s.append(largest_principal_angle(y, vh))
        y = newton_chatelin_step(a, y)
        h1s.append(largest_principal_angle(y, vh))

    print(f"two-sided step:     {slope(e0s, e1s):.3f}")
    print(f"newton, nonnormal:  {slope(n0s, n1s):.3f}")
    print(f"newton, hermitian:  {slope(h0s, h1s):.3f}")


if __name__ == "__main__":
    main()
