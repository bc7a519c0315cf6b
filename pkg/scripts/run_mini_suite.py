#!/usr/bin/env python3
"""A reduced combinatorial suite (every 1-VAR experiment plus a few 2/3-VAR)
on a synthetic cube with all eight variables, including the group statistics
and the accuracy-vs-similarity regression.

Pass --full to run all 92 experiments (slow on a laptop).
"""

import sys

from varenn.experiments import enumerate_combinations, run_suite, save_suite_json, write_suite_report
from varenn.lenet import LeNetConfig, TrainConfig
from varenn.synth import SynthSpec, VariableSynth, synth_generate

TREND_LEVELS = (0.325, 0.1875, 0.0625, -0.0625, -0.25)
NOISE_BY_CODE = {"cld": 8.0, "dtr": 4.0, "frs": 2.0, "pet": 1.0,
                 "pre": 0.5, "tmp": 0.05, "vap": 0.25, "wet": 6.0}


def main() -> int:
    full = "--full" in sys.argv
    variables = {code: VariableSynth(base=10.0, seasonal_amplitude=4.0, seasonal_phase=6.0,
                                     trend_levels=TREND_LEVELS, noise_sd=noise)
                 for code, noise in NOISE_BY_CODE.items()}
    cube = synth_generate(SynthSpec(n_cells=50, n_years=44, seed=31, variables=variables))

    specs = enumerate_combinations("TMP", c_t=0.0, seed=31)
    if not full:
        keep = set(range(1, 9)) | {9, 27, 31, 37, 86}
        specs = [s for s in specs if s.id in keep]
    suite = run_suite(cube, "TMP", c_t=0.0, seed=31, specs=specs, scaling="per_image",
                      train_cfg=TrainConfig(epochs=8, base_lr=0.01, momentum=0.9,
                                            batch_size=32, seed=0),
                      net_cfg=LeNetConfig(conv1_filters=8, conv2_filters=16, fc_units=64))
    for row in suite.rows:
        print(f"#{row.id:<3} {','.join(row.inputs):<14} accuracy={row.accuracy:.3f} "
              f"similarity={row.similarity:.3f}")
    if suite.kruskal:
        print(f"kruskal-wallis p={suite.kruskal.p_value:.4f}")
    for k, fit in sorted(suite.regressions.items()):
        if fit:
            print(f"{k}-VAR regression: slope={fit.slope:.4f} p={fit.p_value:.4f}")
    save_suite_json(suite, "suite.json")
    write_suite_report(suite, "suite_report.txt")
    print("wrote suite.json and suite_report.txt")
    return 0


if __name__ == "__main__":
    sys.exit(main())
