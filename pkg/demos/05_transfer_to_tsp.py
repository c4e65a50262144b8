"""Miniature end-to-end transfer experiment (~5 min).

Pre-trains the processor on Bellman-Ford, then trains two small TSP models
from the same seed, one from scratch and one starting from the pre-trained
processor (fine-tuned), and scores both against the exact oracle and the
classical baselines. Desk-scale configs live in configs/; this is a toy run.

Run:  python3 demos/05_transfer_to_tsp.py
"""

import tempfile
from pathlib import Path

from algoreason.harness import (
    ExperimentConfig,
    cmd_baselines,
    cmd_eval,
    cmd_gen_data,
    cmd_pretrain,
    cmd_train,
)

out = Path(tempfile.mkdtemp(prefix="transfer_demo_"))
print(f"working under {out}")

pre = ExperimentConfig(
    task="pretrain", algorithms=["bellman_ford"], train_sizes=[6, 7, 8],
    samples_per_size=150, val_size=8, val_count=50, test_sizes=[10], test_counts=[20],
    epochs=3, batch_size=32, lr=1e-3, latent=32, out_dir=str(out),
)
print("\n--- generating trajectories and pre-training ---")
cmd_gen_data(pre)
metrics = cmd_pretrain(pre)
print(f"pre-trained: best val accuracy {metrics['best_score']:.3f}")

tsp = dict(
    task="tsp", train_sizes=[6, 7, 8], samples_per_size=120, val_size=8, val_count=30,
    test_sizes=[10], test_counts=[20], epochs=4, batch_size=32, lr=1e-3, latent=32,
    beam_widths=[16], val_beam_width=4, out_dir=str(out),
)
print("\n--- TSP from scratch vs fine-tuned transfer ---")
scratch_cfg = ExperimentConfig(**tsp)
cmd_gen_data(scratch_cfg)
cmd_train(scratch_cfg)
rows = cmd_eval(scratch_cfg, seeds=[0], stem="scratch")

pft_cfg = ExperimentConfig(**tsp, transfer="pft")
cmd_train(pft_cfg)
rows += cmd_eval(pft_cfg, seeds=[0], stem="pft")

rows += cmd_baselines(scratch_cfg)
print(f"\n{'model':<14} {'size':>4} {'rel err':>8}")
for row in sorted(rows, key=lambda r: r.mean_rel_err):
    print(f"{row.model:<14} {row.size:>4} {row.mean_rel_err:>7.1%}")
print("\n(toy scale: treat differences as illustrative, not conclusive)")
