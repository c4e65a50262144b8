"""The reverse-mode tensor core: ops, gradient checking, Adam.

Run:  python3 demos/03_autodiff.py
"""

import numpy as np

from algoreason import autodiff as ad
from algoreason.autodiff import Tensor, constant, grad_check, parameter
from algoreason.losses import softmax_ce_loss
from algoreason.optim import AdamState, adam_step
from algoreason.rng import Rng

rng = Rng(1)

print("=== gradient checks against central differences ===")
W1, b1 = constant(rng.uniform(-1, 1, (6, 16))), constant(rng.uniform(-1, 1, 16))
W2 = constant(rng.uniform(-1, 1, (16, 1)))


def mlp_scalar(x):
    return ad.mean_all(ad.linear(ad.relu(ad.linear(x, W1, b1)), W2))


x = Tensor(rng.uniform(0.5, 1.5, (4, 6)), requires_grad=True)
print(f"two-layer MLP: max rel err = {grad_check(mlp_scalar, x):.2e}")

msgs = Tensor(rng.uniform(-1, 1, (5, 5, 3)), requires_grad=True)
adj = np.ones((5, 5), dtype=bool)
err = grad_check(lambda t: ad.mean_all(ad.max_aggregate(t, adj)), msgs)
print(f"max aggregation: max rel err = {err:.2e}")

print()
print("=== fitting a soft pointer with Adam ===")
target = np.array([2, 0, 3, 1])
logits = parameter(np.zeros((4, 4)))
state = AdamState(lr=0.05)
for step in range(200):
    logits.zero_grad()
    loss = softmax_ce_loss(logits, target)
    loss.backward()
    adam_step({"logits": logits}, {"logits": logits.grad}, state)
    if step % 50 == 0 or step == 199:
        print(f"  step {step:>3}: loss = {loss.item():.5f}")
print(f"argmax rows: {np.argmax(logits.data, axis=1)} (target {target})")
