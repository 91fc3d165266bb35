"""Generate synthetic data, then run the pipeline with ground-truth and predicted query types.

    python3 scripts/run_synthetic_pipeline.py --out runs/synthetic
"""

import argparse
import time
from pathlib import Path

from factqa import synth
from factqa.classifier import TrainingConfig
from factqa.pipeline import RunConfig, run_pipeline


def main():
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("--out", default="runs/synthetic", help="output directory")
    ap.add_argument("--images", type=int, default=200)
    ap.add_argument("--questions-per-type", type=int, default=13)
    ap.add_argument("--seed", type=int, default=0)
    ap.add_argument("--epochs", type=int, default=50, help="classifier epochs for the predicted runs")
    args = ap.parse_args()

    out = Path(args.out)
    spec = synth.SyntheticSpec(images=args.images, questions_per_type=args.questions_per_type, seed=args.seed)
    paths = synth.write(synth.generate(spec), out / "data")
    base = dict(
        kb=str(paths["kb"]),
        annotations=str(paths["annotations"]),
        dataset=str(paths["dataset"]),
        taxonomy=str(paths["taxonomy"]),
        seed=args.seed,
    )
    for name, kw in [
        ("gt", dict(qq="gt")),
        ("top1", dict(qq="predicted", k=1)),
        ("top3", dict(qq="predicted", k=3)),
    ]:
        start = time.perf_counter()
        cfg = RunConfig(**base, **kw, out_dir=str(out / name), training=TrainingConfig(epochs=args.epochs, seed=args.seed))
        report = run_pipeline(cfg).report
        print(f"== {name} ({time.perf_counter() - start:.1f}s)")
        print(report.to_text())


if __name__ == "__main__":
    main()
