"""Small SNR sweep comparing designed and random matrices.

A reduced version of the full experiment (n=6, 30 trials) that finishes in
well under a minute. Pass ``--full`` for the n=10, 200-trial setting.
"""

import sys

from phasedesign import ExperimentConfig, run_snr_sweep

full = "--full" in sys.argv
cfg = ExperimentConfig(
    soi="sum_exponentials",
    n=10 if full else 6,
    snr_db=[-10.0, 0.0, 10.0, 20.0, 30.0],
    matrices=["UC", "MF", "OK", "RG", "CD"],
    trials=200 if full else 30,
    covariance_samples=200_000 if full else 50_000,
)
table = run_snr_sweep(cfg)

labels = list(cfg.matrices)
print(f"mean phase-aligned error, n={cfg.n}, m={cfg.fixed_m}, {cfg.trials} trials")
print("SNR(dB) " + "".join(f"{lab:>9}" for lab in labels))
for snr in cfg.snr_db:
    row = [table.cell(lab, snr)[0].mean_eps for lab in labels]
    print(f"{snr:7.1f} " + "".join(f"{e:9.3f}" for e in row))
