"""Monte-Carlo frequency of Simpson reversals in uniformly random 2x2x2 tables."""

import argparse

from graspcause.events import simulate_reversal_rate


def main():
    ap = argparse.ArgumentParser(description=__doc__)
    ap.add_argument("--draws", type=int, default=100_000)
    ap.add_argument("--seeds", type=int, default=5)
    args = ap.parse_args()
    for s in range(args.seeds):
        print(f"seed {s}: reversal rate {simulate_reversal_rate(args.draws, s):.5f}  (1/60 = {1 / 60:.5f})")


if __name__ == "__main__":
    main()
