"""dae-train: fit the residual denoiser on a PNG corpus and export weights."""

import argparse
import json
import sys

import numpy as np

from .data import load_corpus, sample_patches
from .train import TrainConfig, export_fixture, train


def main(argv=None):
    parser = argparse.ArgumentParser(prog="dae-train", description=__doc__)
    parser.add_argument("--corpus", required=True, help="directory of PNG images (>= 10)")
    parser.add_argument("--output", required=True, help="DMSP weight file to write")
    parser.add_argument("--sigma", type=float, required=True, help="training noise std in [0,1] units")
    parser.add_argument("--patch-size", type=int, default=40)
    parser.add_argument("--patches-per-epoch", type=int, default=512)
    parser.add_argument("--epochs", type=int, default=10)
    parser.add_argument("--batch-size", type=int, default=16)
    parser.add_argument("--depth", type=int, default=5)
    parser.add_argument("--hidden", type=int, default=32)
    parser.add_argument("--learning-rate", type=float, default=1e-3)
    parser.add_argument("--holdout", type=int, default=3)
    parser.add_argument("--seed", type=int, default=0)
    parser.add_argument("--report", default="", help="write the eval report JSON here")
    parser.add_argument("--fixture", default="", help="write a forward-pass parity fixture (npz)")
    args = parser.parse_args(argv)

    cfg = TrainConfig(
        corpus_dir=args.corpus,
        output_path=args.output,
        sigma_train=args.sigma,
        patch_size=args.patch_size,
        patches_per_epoch=args.patches_per_epoch,
        epochs=args.epochs,
        batch_size=args.batch_size,
        depth=args.depth,
        hidden=args.hidden,
        learning_rate=args.learning_rate,
        holdout=args.holdout,
        seed=args.seed,
        report_path=args.report,
    )
    model, report = train(cfg)
    if args.fixture:
        rng = np.random.default_rng(cfg.seed + 1)
        images = load_corpus(cfg.corpus_dir)
        patch = sample_patches(images, min(cfg.patch_size, 48), 1, rng)[0]
        noisy = patch + cfg.sigma_train * rng.standard_normal(patch.shape)
        export_fixture(model, noisy, args.fixture)
        report["fixture"] = args.fixture
    print(json.dumps(report, sort_keys=True))
    return 0


if __name__ == "__main__":
    sys.exit(main())
