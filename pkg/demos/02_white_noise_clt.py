"""Monte Carlo check of the white-noise limit for H = He2 in d = 2.

Runs the shipped golden configuration, prints every verdict and writes
the run directory (report, verdicts, summary and per-replica statistics).
"""

import sys

from bmlab import experiments
from bmlab.config import shipped_config

out = sys.argv[1] if len(sys.argv) > 1 else "demo_runs/clt_d2_h2"
report = experiments.run_experiment(shipped_config("clt_d2_h2.json"))
for v in report.verdicts:
    print(f"{'PASS' if v.passed else 'FAIL'}  {v.name:32s} observed {v.observed:+.4f}  predicted {v.predicted:+.4f}")
print("written to", experiments.write_report(report, out))
