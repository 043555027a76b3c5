"""Ablation sweep over all five model variants on one synthetic dataset,
aggregated the same way the CLI's `ablate` command reports it.

Run:  python demos/05_ablation_sweep.py   (takes a couple of minutes)
"""

from pstatcn import ModelSpec, TrainConfig, VARIANTS, run_experiment, synth_squat

series = synth_squat(n_sensors=2, length=6000, noise_std=0.05, seed=1111)
config = TrainConfig(epochs=6, seed=1111)
grid = [
    (ModelSpec(variant=v, n=series.n_channels - 1, T=32, tau=8, k=5, N=3, H=10, seed=1111),
     config)
    for v in VARIANTS
]
reports = run_experiment(grid, series, jobs=2)

print(f"{'variant':>10} {'test RMSE':>10} {'test MAE':>10} {'final loss':>11}")
for r in sorted(reports, key=lambda r: r.test_rmse):
    print(f"{r.model_spec['variant']:>10} {r.test_rmse:>10.4f} {r.test_mae:>10.4f} "
          f"{r.train_loss[-1]:>11.4f}")
best = min(reports, key=lambda r: r.test_rmse)
print(f"\nlowest test RMSE: {best.model_spec['variant']}")
