"""Answer-classification baselines (most frequent answer, LSTM over the top answers) on a QA dataset.

    python3 scripts/run_baselines.py --data runs/synthetic/data/dataset.jsonl \
        --taxonomy runs/synthetic/data/taxonomy.tsv [--features feats.jsonl]
"""

import argparse

from factqa.baselines import ANSWER_SPACE, MODES, baseline_frequent, baseline_lstm_answers, load_features, with_config
from factqa.evaluation import Prediction, Taxonomy, evaluate, load_dataset, make_splits


def main():
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("--data", required=True)
    ap.add_argument("--taxonomy", required=True)
    ap.add_argument("--features", help="JSON Lines {image_id, features}; without it only the question mode runs")
    ap.add_argument("--splits", type=int, default=5)
    ap.add_argument("--seed", type=int, default=0)
    ap.add_argument("--epochs", type=int, default=50)
    ap.add_argument("--hidden", type=int, default=512)
    args = ap.parse_args()

    rows, _ = load_dataset(args.data)
    taxonomy = Taxonomy.load(args.taxonomy)
    splits = make_splits({qa.image_id for qa in rows}, args.splits, args.seed)
    features = load_features(args.features) if args.features else {}
    modes = MODES if features else ("question",)
    config = with_config(epochs=args.epochs, hidden_dim=args.hidden, seed=args.seed)

    methods = {"frequent": lambda tr: baseline_frequent(tr)}
    for mode in modes:
        methods[f"lstm-{mode}"] = lambda tr, mode=mode: baseline_lstm_answers(tr, ANSWER_SPACE, features, mode, config)

    for name, build in methods.items():
        outputs = []
        for train_ids, test_ids in splits.splits:
            train_set, test_set = set(train_ids), set(test_ids)
            model = build([qa for qa in rows if qa.image_id in train_set])
            test = [qa for qa in rows if qa.image_id in test_set]
            if name == "frequent":
                ranked = [model.predict(k=10)] * len(test)
            else:
                ranked = model.predict_batch([qa.question for qa in test], [qa.image_id for qa in test], k=10)
            outputs.append({qa.question_id: [Prediction(a) for a in r] for qa, r in zip(test, ranked)})
        report = evaluate(outputs, rows, taxonomy, splits, method=name)
        print(report.to_text())


if __name__ == "__main__":
    main()
