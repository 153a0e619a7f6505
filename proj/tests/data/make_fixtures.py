"""Regenerates the synthetic CSV/JSON fixtures used by the command tests."""
import csv
import json
import math
import os
import random

HERE = os.path.dirname(os.path.abspath(__file__))


def write_csv(name, header, rows):
    with open(os.path.join(HERE, name), "w", newline="") as f:
        w = csv.writer(f, lineterminator="\n")
        w.writerow(header)
        w.writerows(rows)


def write_json(name, obj):
    with open(os.path.join(HERE, name), "w") as f:
        json.dump(obj, f, indent=2)
        f.write("\n")


def sigmoid(x):
    return 1.0 / (1.0 + math.exp(-x))


def binary_cohort(rng, name, n, shift, defer_frac=0.0):
    rows = []
    for i in range(n):
        pos = rng.random() < 0.4
        s = sigmoid(rng.gauss(0, 1.2) + (shift if pos else -shift))
        tags = "Defer" if rng.random() < defer_frac else ""
        rows.append([f"{name}{i:03d}", "malignant" if pos else "benign", f"{s:.4f}", tags])
    write_csv(f"{name}.csv", ["case_id", "label", "score", "tags"], rows)


def multiclass_cohort(rng, n):
    classes = ["IDC", "ILC", "DCIS"]
    rows = []
    for i in range(n):
        k = rng.randrange(3)
        raw = [math.exp(rng.gauss(1.5 if j == k else 0, 1)) for j in range(3)]
        tot = sum(raw)
        rows.append([f"m{i:03d}", classes[k]] + [f"{v / tot:.6f}" for v in raw[:2]] +
                    [f"{1 - sum(round(v / tot, 6) for v in raw[:2]):.6f}"] + ["hard" if i % 4 == 0 else ""])
    write_csv("subtype.csv", ["case_id", "label", "score_IDC", "score_ILC", "score_DCIS", "tags"], rows)


def reader_study(rng):
    rows = []
    tasks = {"malignancy": ["benign", "malignant"], "subtype": ["IDC", "ILC", "DCIS"]}
    cases = {t: [(f"{t[:3]}{i:02d}", rng.choice(c)) for i in range(12)] for t, c in tasks.items()}
    for r in range(8):
        exp = "senior" if r % 2 else "junior"
        ai_first = r < 4
        for cond in ["without_ai", "with_ai"]:
            period = 1 if (cond == "with_ai") == ai_first else 2
            for task, cls in tasks.items():
                for cid, truth in cases[task]:
                    p_correct = 0.72 + (0.18 if cond == "with_ai" else 0) + (0.05 if exp == "senior" else 0)
                    timed_out = rng.random() < 0.03
                    if timed_out:
                        rows.append([f"R{r}", exp, cid, task, cond, period, int(ai_first), "TIMEOUT", truth, 0, "",
                                     180, 1])
                        continue
                    correct = rng.random() < p_correct
                    resp = truth if correct else rng.choice([c for c in cls if c != truth])
                    conf = min(10, max(1, round(rng.gauss(6.5 + (1 if cond == "with_ai" else 0), 1.2))))
                    t = round(rng.lognormvariate(math.log(50 if cond == "with_ai" else 60), 0.3), 1)
                    rows.append([f"R{r}", exp, cid, task, cond, period, int(ai_first), resp, truth, int(correct), conf,
                                 t, 0])
    write_csv("reader_study.csv", ["reader_id", "experience", "case_id", "task", "condition", "period",
                                   "with_ai_first", "response", "truth", "correct", "confidence", "time_s",
                                   "timed_out"], rows)
    write_csv("reader_single.csv", ["reader_id", "experience", "case_id", "task", "condition", "period",
                                    "with_ai_first", "response", "truth", "correct", "confidence", "time_s",
                                    "timed_out"], [r for r in rows if r[0] == "R0"])


def survival(rng):
    rows = []
    for i in range(120):
        x = rng.gauss(0, 1)
        age = round(rng.gauss(55, 10))
        stage = rng.choice(["I", "II", "III"])
        hz = math.exp(0.8 * x + (0.4 if stage == "III" else 0))
        t = rng.expovariate(1.0) / hz * 40
        c = rng.uniform(10, 90)
        fold = i % 5
        rows.append([f"s{i:03d}", f"{min(t, c):.2f}", int(t <= c), f"{x + rng.gauss(0, 0.5):.4f}", fold, age, stage])
    write_csv("survival.csv", ["case_id", "time_months", "event", "risk_score", "fold", "cov_age", "cov_stage"], rows)


def paired():
    rows = []
    spec = {"ER": (57, 1, 1, 18), "KI67": (63, 2, 8, 8), "HER2": (10, 0, 0, 18)}
    k = 0
    for bm, (pp, pn, np_, nn) in spec.items():
        for pre, post, cnt in [("positive", "positive", pp), ("positive", "negative", pn),
                               ("negative", "positive", np_), ("negative", "negative", nn)]:
            for _ in range(cnt):
                rows.append([f"p{k:04d}", bm, pre, post])
                k += 1
    write_csv("paired.csv", ["case_id", "biomarker", "pre_label", "post_label"], rows)


def compare(rng):
    rows = []
    for task in ["pre", "post"]:
        for c in range(8):
            base = rng.uniform(0.7, 0.9)
            for m, off in [("modelA", 0.03), ("modelB", 0.0), ("modelC", -0.02)]:
                rows.append([m, f"{task}_c{c}", f"{base + off + rng.gauss(0, 0.01):.4f}", task])
    write_csv("compare.csv", ["model", "cohort", "value", "task"], rows)


def prioritization(rng, name, n):
    rows = []
    for i in range(n):
        y = int(rng.random() < 0.36)
        clin = sigmoid(rng.gauss(0, 1) + 0.6 * y)
        model = sigmoid(rng.gauss(0, 1) + 1.4 * y)
        rows.append([f"{name}{i:03d}", y, f"{clin:.4f}", f"{model:.4f}", f"{(clin + model) / 2:.4f}"])
    write_csv(f"{name}.csv", ["case_id", "truth", "score_clinical", "score_model_only", "score_clinical_plus_model"],
              rows)


def main():
    rng = random.Random(20240212)
    binary_cohort(rng, "frozen_internal", 150, 1.6, defer_frac=0.15)
    binary_cohort(rng, "frozen_external", 200, 1.3, defer_frac=0.1)
    multiclass_cohort(rng, 90)
    reader_study(rng)
    survival(rng)
    paired()
    compare(rng)
    prioritization(rng, "tp53_internal", 235)
    prioritization(rng, "tp53_external", 99)
    write_json("frozen_internal.schema.json", {"name": "frozen_internal", "task": "malignancy",
                                               "classes": ["benign", "malignant"], "positive": "malignant"})
    write_json("frozen_external.schema.json", {"name": "frozen_external", "task": "malignancy", "role":
                                               "retrospective_external", "classes": ["benign", "malignant"],
                                               "positive": "malignant"})
    write_json("subtype.schema.json", {"name": "subtype", "task": "subtype", "classes": ["IDC", "ILC", "DCIS"],
                                       "normalized": True})
    write_json("policy_ruleout.json", {"type": "rule_out_npv", "min_npv": 0.95})
    write_json("policy_rulein.json", {"type": "rule_in_ppv", "min_ppv": 0.9})
    write_json("policy_rescue.json", {"type": "rescue_burden", "min_rescue_rate": 0.4, "max_review_burden": 0.4})
    write_json("policy_impossible.json", {"type": "rule_in_ppv", "min_ppv": 1.0})
    write_csv("er_rescue_counts.csv", ["threshold", "total_fn", "rescued_fn", "review_cases", "doctor_negative_cases"],
              [[0.1, 50, 47, 189, 207], [0.2, 50, 38, 147, 207], [0.3, 50, 30, 109, 207], [0.4, 50, 25, 90, 207],
               [0.479, 50, 22, 74, 207], [0.5, 50, 20, 71, 207], [0.6, 50, 11, 50, 207], [0.7, 50, 10, 36, 207],
               [0.8, 50, 10, 32, 207], [0.9, 50, 9, 20, 207]])


if __name__ == "__main__":
    main()
