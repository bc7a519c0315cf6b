#!/usr/bin/env python3
"""End-to-end demo on a small synthetic cube: generate, encode, train, map.

Writes everything under ./demo_out and prints the per-epoch log plus the
test-split evaluation. Runs in about two minutes on a laptop CPU.
"""

import os
import sys

from varenn.dataset import Split, save_manifest, split_tensors
from varenn.encode import VarennImage, export_png, write_image_cache
from varenn.experiments import ExperimentSpec, run_experiment
from varenn.lenet import TrainConfig, save_checkpoint
from varenn.render import MapRecord, render_map
from varenn.synth import SynthSpec, VariableSynth, synth_generate


def main() -> int:
    out = "demo_out"
    os.makedirs(out, exist_ok=True)

    spec = SynthSpec(n_cells=60, n_years=50, seed=12, variables={
        "tmp": VariableSynth(base=10.0, seasonal_amplitude=5.0, seasonal_phase=6.0,
                             trend_levels=(0.325, 0.1875, 0.0625, -0.0625, -0.25),
                             noise_sd=0.05),
        "pre": VariableSynth(base=60.0, seasonal_amplitude=20.0, seasonal_phase=0.0,
                             trend_spread=1.5, noise_sd=2.0, ar1=0.3),
    })
    cube = synth_generate(spec)
    print(f"cube: {cube.n_cells} cells x {cube.n_years} years x {len(cube.variables)} variables")

    experiment = ExperimentSpec(id=31, target="TMP", inputs=("pre", "tmp"), c_t=0.0, seed=12)
    result = run_experiment(cube, experiment, scaling="per_image",
                            train_cfg=TrainConfig(epochs=8, base_lr=0.01, momentum=0.9,
                                                  batch_size=32, seed=12))
    for row in result.log:
        print(f"epoch {row.epoch}: lr={row.lr:.4f} train_loss={row.train_loss:.4f} "
              f"val_loss={row.val_loss:.4f} val_acc={row.val_accuracy:.3f}")
    print(f"test accuracy={result.accuracy:.3f} kappa={result.kappa:.3f} "
          f"(n_test={result.n_test})")
    print("confusion matrix (rows true, cols predicted):")
    print(result.confusion.counts)

    manifest = result.manifest
    save_manifest(manifest, os.path.join(out, "manifest.tsv"))
    write_image_cache(manifest.images, os.path.join(out, "images.vimg"))
    save_checkpoint(result.params, os.path.join(out, "model.vnet"))

    sample = VarennImage(manifest.images[0], experiment.input_variables)
    export_png(sample, os.path.join(out, "sample_window.png"))

    from varenn.lenet import predict
    tensors = split_tensors(manifest)
    test_x, test_y = tensors[Split.TEST]
    predicted, _ = predict(result.params, test_x)
    test_records = [rec for rec in manifest.records if rec.split is Split.TEST]
    map_records = [MapRecord(rec.lat, rec.lon, rec.label_ordinal, int(p) + 1)
                   for rec, p in zip(test_records, predicted)]
    render_map(map_records, os.path.join(out, "map_classes.png"), kind="classes")
    render_map(map_records, os.path.join(out, "map_errors.png"), kind="errors")
    print(f"artifacts in {out}/")
    return 0


if __name__ == "__main__":
    sys.exit(main())
