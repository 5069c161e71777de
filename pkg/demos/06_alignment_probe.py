"""Training on the variance of the errors only learns the shape.

A network fitted to y = 3x + 2 with loss_diff alone gets the slope right
but not the offset: the loss cannot see a constant shift.
"""

import numpy as np

from gar import losses as L
from gar.network import NetworkSpec, forward, gradient_alignment_probe, init, predict
from gar.optim import adam_step

x = np.linspace(-1, 1, 200).reshape(-1, 1)
y = 3 * x + 2

for seed in (0, 1):
    spec = NetworkSpec(1, (16, 16), 1)
    p = init(spec, seed)
    state = {}
    for t in range(1, 2001):
        p.zero_grad()
        L.loss_diff(L.Batch(forward(p, x), y)).backward()
        adam_step(p.flat, p.grad, state, 1e-2, t=t)
    slopes = [gradient_alignment_probe(p, x0, 1e-3) for x0 in np.linspace(-0.8, 0.8, 5)]
    offset = predict(p, np.zeros((1, 1)))[0, 0]
    print(f"seed {seed}: slopes {np.round(slopes, 3)}, f(0) = {offset:.3f} (truth 2)")
