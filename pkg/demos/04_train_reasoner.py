"""Teach the processor a classical algorithm from trajectories (~2 min).

Trains on min-finding, the quickest task to learn, and prints the
validation accuracy per epoch.  Run:  python3 demos/04_train_reasoner.py
"""

from algoreason.algorithms import sample_trajectory
from algoreason.rng import Rng
from algoreason.transfer import pretrain

rng = Rng(3)
gen = rng.split("gen")
train = {"find_min": [sample_trajectory("find_min", int(gen.integers(6, 9)), gen)
                      for _ in range(1200)]}
val = {"find_min": [sample_trajectory("find_min", 8, gen.split("val")) for _ in range(100)]}

print("training the processor on min-finding (n in 6..8, val at n=8)")
result = pretrain(
    ["find_min"], train, val, rng.split("train"),
    epochs=15, batch_size=32, lr=1e-3, latent=48,
    target_accuracy=0.99,
    log=lambda e: print(f"  epoch {e['epoch']:>2}: "
                        f"loss={e['train_loss']['find_min']:.4f} "
                        f"val accuracy={e['val_accuracy']['find_min']:.3f}"),
)
print(f"best epoch {result.best_epoch}: accuracy {result.best_score:.3f}")

ood = {"find_min": [sample_trajectory("find_min", 16, gen.split("ood")) for _ in range(100)]}
from algoreason.training import evaluate_outputs

score = evaluate_outputs(result.model, ood["find_min"])
print(f"2x-size extrapolation (n=16): accuracy {score['argmin_out']:.3f}")
