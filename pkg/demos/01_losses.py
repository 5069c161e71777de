"""Losses: linear closed forms against their pairwise definitions.

Run with ``python3 demos/01_losses.py``.
"""

import numpy as np

from gar import autodiff as ad
from gar import losses as L

rng = np.random.default_rng(0)
y = rng.uniform(-10, 10, size=(300, 1))
f = y + rng.normal(scale=2.0, size=y.shape) + 1.5  # noisy, shifted predictions

batch = L.Batch.of(f, y)

# The variance of the errors equals the average over all N^2 pairs of half
# the squared mismatch between prediction and target differences.
print("loss_diff        ", L.loss_diff(batch).item())
print("pairwise, N^2    ", L.pairwise_diff_quadratic(batch))

# One minus Pearson, again checked against the explicit pairwise form.
print("loss_diffnorm    ", L.loss_diffnorm(batch, eps=0.0).item())
print("pairwise, N^2    ", L.pairwise_diffnorm_quadratic(batch))
print("1 - np.corrcoef  ", 1 - np.corrcoef(f[:, 0], y[:, 0])[0, 1])

# MSE splits into the error variance and the squared mean error.  The 1.5
# shift above shows up almost entirely in the second term.
var, sq = L.mse_decomposition(batch)
print(f"mse {L.mse(batch).item():.4f} = variance {var:.4f} + mean^2 {sq:.4f}")

# Shifting every prediction by a constant leaves both pairwise losses unchanged.
shifted = L.Batch.of(f + 100.0, y)
print("shift invariance ", L.loss_diff(shifted).item() - L.loss_diff(batch).item())

# Gradients come from the autodiff graph.
pred = ad.variable(f.copy())
L.loss_diff(L.Batch(pred, y)).backward()
err = f - y
print("d loss_diff / df matches 2 (e - mean e) / N:", np.allclose(pred.grad, 2 * (err - err.mean()) / len(f)))

print(L.breakdown(batch))
