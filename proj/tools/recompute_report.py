#!/usr/bin/env python3
# Copyright 2026 The atlab Authors.
# SPDX-License-Identifier: Apache-2.0
"""Recompute report metrics from per-item records and compare exactly.

Usage: recompute_report.py REPORT.json [REPORT.json ...]
Exit status 0 when every metric matches bit for bit, 1 otherwise.
"""

import argparse
import json
import math
import pathlib
import sys


def recall(records, k, keep=lambda r: True):
    chosen = [r for r in records if keep(r)]
    if not chosen:
        raise ValueError("no records for a recall metric")
    hits = sum(1 for r in chosen if r["rank"] < k)
    return hits / len(chosen)


def retrieval(summary, records):
    return {f"R@{k}": recall(records, k) for k in summary["params"]["ks"]}


def then_as(summary, records):
    k = summary["params"]["k"]
    out = {}
    for direction in ("as", "then"):
        for variant in ("original", "substituted"):
            out[f"{direction}/{variant}_R@{k}"] = recall(
                records, k,
                lambda r: r["direction"] == direction and r["variant"] == variant)
    return out


def pte_swap(summary, records):
    out = {v + "_R@1": recall(records, 1, lambda r: r["variant"] == v)
           for v in ("original", "swapped")}
    out["drop"] = out["original_R@1"] - out["swapped_R@1"]
    return out


def bat(summary, records):
    total = 0.0
    for r in records:
        total += r["score"]
    return {"bat_percent": 100.0 * total / len(records)}


def zero_shot(summary, records):
    n = summary["params"]["num_labels"]
    tp, fp, fn = [0] * n, [0] * n, [0] * n
    for r in records:
        p, t = r["predicted"], r["truth"]
        if p == t:
            tp[t] += 1
        else:
            fp[p] += 1
            fn[t] += 1
    scores = [2.0 * tp[c] / (2 * tp[c] + fp[c] + fn[c])
              for c in range(n) if tp[c] + fp[c] + fn[c]]
    total = 0.0
    for s in scores:
        total += s
    return {"macro_f1": total / len(scores) if scores else 0.0}


def sed(summary, records):
    tp = sum(1 for r in records if r["truth"] and r["predicted"])
    fp = sum(1 for r in records if not r["truth"] and r["predicted"])
    fn = sum(1 for r in records if r["truth"] and not r["predicted"])
    return {
        "f1": 2.0 * tp / (2 * tp + fp + fn) if tp else 0.0,
        "precision": tp / (tp + fp) if tp + fp else 0.0,
        "recall": tp / (tp + fn) if tp + fn else 0.0,
        "threshold": summary["params"]["threshold"],
    }


PROTOCOLS = {"retrieval": retrieval, "then_as": then_as, "pte_swap": pte_swap,
             "bat": bat, "zero_shot": zero_shot, "sed": sed}


def same(a, b):
    if isinstance(a, float) and isinstance(b, float) and math.isnan(a) and math.isnan(b):
        return True
    return float(a).hex() == float(b).hex()


def check(path):
    summary = json.loads(path.read_text())
    lines = path.with_suffix(".jsonl").read_text().splitlines()
    records = [json.loads(line) for line in lines if line]
    if len(records) != summary["records"]:
        return [f"{path}: {len(records)} records, summary says {summary['records']}"]
    again = PROTOCOLS[summary["protocol"]](summary, records)
    problems = []
    for name in sorted(set(summary["metrics"]) | set(again)):
        if name not in summary["metrics"] or name not in again:
            problems.append(f"{path}: metric {name} missing on one side")
        elif not same(summary["metrics"][name], again[name]):
            problems.append(f"{path}: {name} reported {summary['metrics'][name]!r}, "
                            f"recomputed {again[name]!r}")
    return problems


def main():
    parser = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    parser.add_argument("reports", nargs="+", type=pathlib.Path)
    args = parser.parse_args()
    problems = []
    for path in args.reports:
        found = check(path)
        problems += found
        print(f"{'FAIL' if found else 'ok  '} {path}")
    for p in problems:
        print(p, file=sys.stderr)
    return 1 if problems else 0


if __name__ == "__main__":
    sys.exit(main())
