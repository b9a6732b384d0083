"""Generate synthetic run/qrels pairs and freeze trec_eval's scores for them.

trec_eval (through pytrec_eval) is the reference. Means are taken over every
qrels query, with queries absent from the run scoring 0 (trec_eval -c).
Exponential-gain nDCG is obtained from trec_eval by rewriting grades g as
2^g - 1, since trec_eval's own gain is the grade itself.

Usage: python3 trec_parity_fixture.py <out_dir> [--check]
"""
import json
import os
import random
import sys

import pytrec_eval

PAIRS = 25
MEASURES = {"map", "ndcg_cut.10", "recall.1000"}


def synth(rng: random.Random):
    n_queries = rng.randint(1, 10)
    qrels, run = {}, {}
    for q in range(n_queries):
        qid = str(100 + q * rng.randint(1, 7))
        if qid in qrels:
            continue
        pool = [f"D{rng.randint(0, 400)}" for _ in range(rng.randint(5, 140))]
        pool = sorted(set(pool))
        judged = rng.sample(pool, k=rng.randint(1, min(len(pool), 40)))
        qrels[qid] = {d: rng.choice([0, 0, 1, 1, 2, 3]) for d in judged}
        if rng.random() < 0.1:
            qrels[qid] = {d: 0 for d in judged}
        if rng.random() < 0.12:
            continue  # judged but never retrieved
        depth = rng.randint(1, min(100, len(pool)))
        docs = rng.sample(pool, k=depth)
        run[qid] = {d: round(rng.uniform(0, 20), rng.choice([0, 1, 2])) for d in docs}
    if not run:
        qid = next(iter(qrels))
        run[qid] = {d: 1.0 for d in qrels[qid]}
    if rng.random() < 0.3:
        run["999"] = {"D1": 1.0, "D2": 0.5}  # unjudged query, ignored
    return qrels, run


def evaluate(qrels, run, threshold):
    ev = pytrec_eval.RelevanceEvaluator(qrels, MEASURES, relevance_level=threshold)
    lin = ev.evaluate(run)
    exp_qrels = {q: {d: 2 ** g - 1 for d, g in docs.items()} for q, docs in qrels.items()}
    exp = pytrec_eval.RelevanceEvaluator(exp_qrels, {"ndcg_cut.10"}).evaluate(run)
    per_query = {}
    for qid in qrels:
        r = lin.get(qid)
        e = exp.get(qid)
        per_query[qid] = {
            "map": r["map"] if r else 0.0,
            "ndcg_cut_10_linear": r["ndcg_cut_10"] if r else 0.0,
            "ndcg_cut_10_exponential": e["ndcg_cut_10"] if e else 0.0,
            "recall_1000": r["recall_1000"] if r else 0.0,
        }
    n = len(per_query)
    mean = {k: sum(m[k] for m in per_query.values()) / n for k in next(iter(per_query.values()))}
    return {"threshold": threshold, "per_query": per_query, "mean": mean}


def write_pair(out_dir, i, qrels, run):
    with open(os.path.join(out_dir, f"pair{i:02d}.qrels"), "w") as fh:
        for qid, docs in qrels.items():
            for d, g in docs.items():
                fh.write(f"{qid} 0 {d} {g}\n")
    with open(os.path.join(out_dir, f"pair{i:02d}.run"), "w") as fh:
        for qid, docs in run.items():
            ranked = sorted(docs.items(), key=lambda kv: -kv[1])
            for rank, (d, s) in enumerate(ranked, 1):
                fh.write(f"{qid} Q0 {d} {rank} {s!r} synth\n")


def main() -> int:
    out_dir = sys.argv[1]
    check = "--check" in sys.argv
    os.makedirs(out_dir, exist_ok=True)
    rng = random.Random(20250605)
    ok = True
    for i in range(PAIRS):
        qrels, run = synth(rng)
        threshold = 2 if i % 3 == 0 else 1
        expected = evaluate(qrels, run, threshold)
        path = os.path.join(out_dir, f"pair{i:02d}.expected.json")
        if check:
            with open(path) as fh:
                frozen = json.load(fh)
            for key, val in expected["mean"].items():
                if abs(frozen["mean"][key] - val) > 1e-12:
                    print(f"pair {i}: frozen {key} differs from trec_eval")
                    ok = False
            continue
        write_pair(out_dir, i, qrels, run)
        with open(path, "w") as fh:
            json.dump(expected, fh, indent=1, sort_keys=True)
    return 0 if ok else 1


if __name__ == "__main__":
    sys.exit(main())
