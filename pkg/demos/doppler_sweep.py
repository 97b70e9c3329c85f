"""How the bundled figure verdicts move with the channel's Doppler-symbol product.

The channel matrix depends on f_d*T only through the level-crossing rates, so
slower fading means stickier channel states. Each row re-solves the bundled
specs with both channels set to the given f_d*T and prints the verdict of
every check that the spec lists.
"""
import dataclasses
import sys

from nctwrc import build_model, value_iteration
from nctwrc.experiments import evaluate_check, load_spec

FIGS = ("fig4", "fig5", "fig6", "fig7", "fig8", "fig9", "fig10")
SWEEP = (0.004, 0.0055, 0.006, 0.0065, 0.007, 0.008, 0.01, 0.015, 0.02, 0.04)


def with_doppler(params, fdT):
    ch = [dataclasses.replace(c, doppler_symbol_product=fdT) for c in (params.channel1, params.channel2)]
    return dataclasses.replace(params, channel1=ch[0], channel2=ch[1])


def main(sweep=SWEEP):
    specs = [load_spec(f) for f in FIGS]
    for fdT in sweep:
        matched = 0
        cells = []
        for spec in specs:
            model = build_model(with_doppler(spec.params, fdT))
            res = value_iteration(model, spec.tolerance)
            ok = True
            for c in spec.checks:
                passed = evaluate_check(c, model, res).passed
                if c in spec.expect and passed != spec.expect[c]:
                    ok = False
                    cells.append(f"{spec.name}:{c}={'pass' if passed else 'fail'}")
            matched += ok
        print(f"f_dT={fdT:<7} matched {matched}/{len(specs)}  " + (" ".join(cells) or "-"))


if __name__ == "__main__":
    main([float(x) for x in sys.argv[1:]] or SWEEP)
