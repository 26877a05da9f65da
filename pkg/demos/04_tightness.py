"""Negative Sobolev norms of Phi_N stay bounded as N grows.

Prints E||Phi_N||^2_{H^-alpha} for alpha = d/2 + 1/2 in d = 2 together with
the truncated kernel sup, which stabilises as more modes are kept.
"""

from bmlab import ExperimentConfig, kernel_bound
from bmlab import experiments

cfg = ExperimentConfig(experiment="tightness", d=2, model={"kind": "nearest_neighbour", "c": 0.2},
                       observable={"power": 2}, test_functions=[], N_list=[9, 17, 33], replicas=300, seed=4,
                       alpha=1.5, K_max=32)
report = experiments.run_experiment(cfg)
for N, _, stat, value, se in report.summary:
    print(f"N={N:3d}  {stat} {value:.4f} +- {se:.4f}")
for K in (8, 16, 32, 64):
    kb = kernel_bound(1.5, 16, K, d=2)
    print(f"K_max={K:3d}  kernel sup {kb.value:.5f}  tail bound {kb.tail_bound:.2e}")
