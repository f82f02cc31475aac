"""POD-PROM vs DMD-PROM on the advection-diffusion problem.

Sweeps the number of training snapshots and the reduced rank at the
target velocity 2000 and prints the total relative errors.
"""

from _common import parser, run


def main():
    args = parser(__doc__).parse_args()
    report = run("adv_diff", args.out)
    ranks = sorted({e.rank for e in report.errors})
    for method in ("pod", "dmd"):
        print(f"\n{method.upper()}  total relative L2 error  (rows: n_snap, cols: rank)")
        print("n_snap " + "".join(f"{r:>11d}" for r in ranks))
        for n in report.config["n_snap"]:
            row = {e.rank: e.total for e in report.select(method, n_snap=n)}
            print(f"{n:6d} " + "".join(f"{row[r]:11.3e}" for r in ranks))
        drift = [e.diagnostics.get("affine_drift") for e in report.select(method, rank=10)]
        if method == "dmd":
            print("affine drift at r=10:", ", ".join(f"{d:.3f}" for d in drift))


if __name__ == "__main__":
    main()
