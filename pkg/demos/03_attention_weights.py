"""What the two attention blocks compute: per-time-step channel weights that
sum to 1 down each column (spatial) and per-channel time weights that sum to
1 along each row (temporal).

Run:  python demos/03_attention_weights.py
"""

import numpy as np

from pstatcn import ModelSpec, build, synth_squat
from pstatcn.data import sliding_windows, chronological_split, compute_norm_stats, normalize

series = synth_squat(n_sensors=1, length=600, noise_std=0.03, seed=1111)
train, _ = chronological_split(series)
window = sliding_windows(normalize(train, compute_norm_stats(train)), T=12, tau=2)[0].input

spec = ModelSpec(variant="PSTA_TCN", n=series.n_channels - 1, T=12, tau=2, k=3, N=2, H=6)
model = build(spec)
weights = model.attention_weights(window)

alpha, beta = weights["alpha"], weights["beta"]
print(f"window: {window.shape[0]} channels x {window.shape[1]} steps")
print(f"alpha column sums (softmax over channels): {np.round(alpha.sum(axis=0), 12)}")
print(f"beta row sums (softmax over time), first 4 channels: {np.round(beta.sum(axis=1)[:4], 12)}")
print("\nspatial weights at the final step (untrained, near-uniform):")
for name, value in zip(series.names, alpha[:, -1]):
    print(f"  {name:<15} {value:.4f}")
