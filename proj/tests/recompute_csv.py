#!/usr/bin/env python3
"""Recompute per-trial CSV aggregates and compare against the CLI summary."""
import csv
import re
import sys


def main() -> int:
    csv_path, summary_path = sys.argv[1], sys.argv[2]
    rows = list(csv.DictReader(open(csv_path)))
    if not rows:
        print("no rows")
        return 1
    mean_total = sum(int(r["messages_total"]) for r in rows) / len(rows)
    mean_unicast = sum(int(r["messages_unicast"]) for r in rows) / len(rows)
    pass_rate = sum(1 for r in rows if r["verdict"] == "pass") / len(rows)
    for r in rows:
        if int(r["messages_total"]) != int(r["messages_unicast"]) + int(r["messages_broadcast"]):
            print("row total mismatch:", r)
            return 1

    summary = open(summary_path).read()
    claimed = {
        key: float(m.group(1))
        for key, m in (
            (key, re.search(key + r"=([0-9.eE+-]+)", summary))
            for key in ("pass_rate", "mean_total", "mean_unicast")
        )
        if m
    }
    checks = [
        ("mean_total", mean_total),
        ("mean_unicast", mean_unicast),
        ("pass_rate", pass_rate),
    ]
    ok = True
    for key, recomputed in checks:
        if key not in claimed or abs(claimed[key] - recomputed) > 1e-4 * max(1.0, recomputed):
            print(f"{key}: summary={claimed.get(key)} recomputed={recomputed}")
            ok = False
    return 0 if ok else 1


if __name__ == "__main__":
    sys.exit(main())
