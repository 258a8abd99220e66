"""Run the two-school scenario and print the exposed share per school.

    python3 scripts/run_adams_berry.py [--iterations 50] [--csv out.csv]
"""

import argparse
import csv
import sys

from pram import run
from pram.scenario import load_scenario


def main(argv=None):
    ap = argparse.ArgumentParser()
    ap.add_argument("--iterations", type=int, default=50)
    ap.add_argument("--csv", help="also write iter,exposed_adams,exposed_berry here")
    args = ap.parse_args(argv)

    s = load_scenario("adams-berry")
    traj = run(s.population, s.rules, args.iterations, s.probes)
    adams = traj.probe_series("exposed_adams")
    berry = traj.probe_series("exposed_berry")

    for it, (a, b) in enumerate(zip(adams, berry)):
        print(f"{it:4d}  adams {a:.4f}  berry {b:.4f}  {'#' * round(40 * b)}")
    print(f"peak exposed: adams {max(adams):.4f} (iter {adams.index(max(adams))}), "
          f"berry {max(berry):.4f} (iter {berry.index(max(berry))})")

    if args.csv:
        with open(args.csv, "w", newline="") as fh:
            w = csv.writer(fh, lineterminator="\n")
            w.writerow(["iter", "exposed_adams", "exposed_berry"])
            w.writerows((i, "%.17g" % a, "%.17g" % b) for i, (a, b) in enumerate(zip(adams, berry)))


if __name__ == "__main__":
    sys.exit(main())
