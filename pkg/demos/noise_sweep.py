"""Mean error versus noise level for both ranging models, next to the Fisher bound.

A desk-scale version of the full campaign: 60 sensors per cell instead of
thousands.  Takes two to three minutes on one core.
"""
from qtdoa import ExperimentConfig, run_campaign, summarize

config = ExperimentConfig(trials=60, master_seed=7)
records = run_campaign(config)

print(f"{'eta':>5} {'mode':>10} {'ME [m]':>9} {'bound [m]':>10} {'ok':>4} {'sec':>6}")
for row in summarize(records):
    print(f"{row.eta:5.2f} {row.mode:>10} {row.me:9.4f} {row.mean_bound:10.4f} "
          f"{row.successes:4d} {row.mean_seconds:6.3f}")

by_cell = {(r.eta, r.mode): r.me for r in summarize(records)}
gains = [1 - by_cell[(e, "quantum")] / by_cell[(e, "classical")] for e in config.eta_grid if e > 0]
print("mean relative gain of the quantum-assisted model:", f"{sum(gains) / len(gains):.2f}")
