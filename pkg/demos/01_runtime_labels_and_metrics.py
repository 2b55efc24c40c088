"""Turning solver runtimes into labels, and scoring a set of solver picks."""

import io

import numpy as np

from satselect.data import label_best_solver, load_runtimes, vbs_stats
from satselect.evaluation import compute_metrics

# three instances, three solvers; the third instance times out everywhere
text = """instance,Glucose,Minisat,Lingeling
hard1,420,599,187
easy1,10,13,40
stuck,1500,1300,1201
"""
runtimes = load_runtimes(io.StringIO(text), cutoff_s=1200)   # values above 1200 s are clamped
print(runtimes.values)

labels, unsolved = label_best_solver(runtimes)
print("labels:", labels)          # index of the fastest solver per instance
print("unsolved:", unsolved)      # every solver hit the cutoff

# picking Glucose for hard1 costs 420 - 187 = 233 s of regret
solved = runtimes.values[:2]
report = compute_metrics([0, 1], solved)
print(report.table())
# easy1 with Minisat is 3 s slower than the best, so it counts for acc5 only

stats = vbs_stats(runtimes)
print("virtual best solver:", stats)

# the virtual best solver itself is perfect by construction
print(compute_metrics(solved.argmin(axis=1), solved))
