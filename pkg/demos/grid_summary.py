"""
Reading a results directory
===========================

Print the interval table and the per-level means from a finished grid.
Pass the results directory as the first argument (default ``results``).
"""

import sys

from qembench import bench

out = sys.argv[1] if len(sys.argv) > 1 else "results"
records = bench.read_records(out)
print(len(records), "records;", sum(r["status"] != "ok" for r in records), "with a non-ok status")

print(bench.summarize(records).to_text())

# the same numbers level by level
for kind, mit, p, mean, lo, hi, n in bench.per_level_rows(records):
    print(f"{kind:<18s} {mit:<5s} p={p:<5g} mean={mean:.4f} min={lo:.4f} max={hi:.4f} n={n}")
