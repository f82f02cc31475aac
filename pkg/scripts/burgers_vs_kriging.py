"""DMD-PROM vs per-entry Kriging on viscous Burgers, plus speedups.

Two training viscosities, 49 interior test viscosities.
"""

from _common import parser, run


def main():
    args = parser(__doc__).parse_args()
    report = run("burgers", args.out)
    dmd = {e.param: e.total for e in report.select("dmd")}
    krig = {e.param: e.total for e in report.select("kriging")}
    wins = sum(dmd[p] <= krig[p] for p in dmd)
    print(f"{'nu':>10s} {'E_dmd':>11s} {'E_kriging':>11s}")
    for p in sorted(dmd):
        print(f"{p[0]:10.6f} {dmd[p]:11.3e} {krig[p]:11.3e}")
    print(f"DMD at or below Kriging at {wins}/{len(dmd)} test points")
    t = report.timing("dmd")
    print(
        f"HFM {t.hfm:.2f}s  datagen {t.datagen:.2f}s  offline {t.offline:.3f}s  online {t.online:.3f}s  "
        f"online speedup {t.online_speedup:.1f}  total speedup {t.total_speedup:.1f}"
    )


if __name__ == "__main__":
    main()
