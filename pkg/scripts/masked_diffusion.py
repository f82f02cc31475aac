"""Error-vs-parameter sweep on the masked diffusion problem for three QoIs."""

from _common import parser, run

VARIANTS = ("masked_state", "masked_flux", "masked_heat_rate")


def main():
    args = parser(__doc__).parse_args()
    reports = {v: run(v, args.out) for v in VARIANTS}
    print("p      " + "".join(f"{v[7:]:>14s}" for v in VARIANTS))
    first = reports[VARIANTS[0]].errors
    for i, e in enumerate(first):
        print(f"{e.param[0]:5.2f}  " + "".join(f"{reports[v].errors[i].total:14.4e}" for v in VARIANTS))


if __name__ == "__main__":
    main()
