"""Query-type classifier on templated synthetic questions: held-out Top-1/Top-3 per seed.

    python3 scripts/train_classifier_experiment.py --seeds 0 1 2
"""

import argparse
import time

import numpy as np

from factqa import synth
from factqa.classifier import TrainingConfig, topk_accuracy, train


def holdout(rows, frac, seed):
    rng = np.random.default_rng(seed)
    by_type = {}
    for qa in rows:
        by_type.setdefault(qa.query_type, []).append(qa)
    tr, te = [], []
    for qt in sorted(by_type):
        group = by_type[qt]
        perm = rng.permutation(len(group))
        cut = int(round(frac * len(group)))
        te += [group[n] for n in perm[:cut]]
        tr += [group[n] for n in perm[cut:]]
    return tr, te


def main():
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("--seeds", type=int, nargs="+", default=[0, 1, 2])
    ap.add_argument("--questions-per-type", type=int, default=40)
    ap.add_argument("--holdout", type=float, default=0.2)
    ap.add_argument("--optimizer", choices=("adam", "sgd"), default="adam")
    ap.add_argument("--epochs", type=int, default=50)
    args = ap.parse_args()

    rows = []
    for seed in args.seeds:
        data = synth.generate(synth.SyntheticSpec(questions_per_type=args.questions_per_type, seed=seed))
        tr, te = holdout(data.dataset, args.holdout, seed)
        cfg = TrainingConfig(seed=seed, optimizer=args.optimizer, epochs=args.epochs)
        start = time.perf_counter()
        clf = train([(qa.question, qa.query_type) for qa in tr], cfg)
        held = [(qa.question, qa.query_type) for qa in te]
        acc = (topk_accuracy(clf, held, 1), topk_accuracy(clf, held, 3))
        rows.append(acc)
        print(
            f"seed {seed}: train {len(tr)} / test {len(te)}  loss {clf.losses[0]:.3f} -> {clf.losses[-1]:.3f}  "
            f"top1 {acc[0]:.2%}  top3 {acc[1]:.2%}  ({time.perf_counter() - start:.1f}s)"
        )
    a = np.array(rows)
    print(f"mean top1 {a[:, 0].mean():.2%} ± {a[:, 0].std():.2%}   top3 {a[:, 1].mean():.2%} ± {a[:, 1].std():.2%}")


if __name__ == "__main__":
    main()
