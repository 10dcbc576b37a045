"""Phase estimation from a finite number of binary measurements.

The fraction of zero outcomes estimates cos^2(theta / 2); inverting it gives
the phase, and the phase gives the range combination.  The spread of the
estimate shrinks like 1 / sqrt(shots).
"""
import numpy as np

from qtdoa import PhaseModel, decode_distance, estimate_phase, phase_from_distance, sample_shots

model = PhaseModel(kappa=2.0)  # rad per meter
distance = 0.4
theta = phase_from_distance(distance, model)
rng = np.random.default_rng(3)

print(f"true phase {theta:.4f} rad, true distance {distance} m")
for shots in (100, 400, 1600, 6400):
    est = np.array([decode_distance(estimate_phase(sample_shots(theta, shots, rng)), model)
                    for _ in range(4000)])
    rmse = np.sqrt(np.mean((est - distance) ** 2))
    print(f"N = {shots:5d}  mean {est.mean():.5f} m  rmse {rmse:.5f} m  rmse*sqrt(N) {rmse * np.sqrt(shots):.3f}")
