"""The KL-robust aggregate of several losses, and how alpha moves it.

alpha * log(mean L_k^(1/alpha)) sits between the log of the geometric
mean (large alpha) and the log of the largest loss (small alpha), with the
arithmetic mean at alpha = 1.
"""

import math

import numpy as np

from gar import autodiff as ad
from gar.aggregate import GarConfig, gar_kl, gar_limits_check

losses = [1.0, 2.0, 4.0]
print("alpha      exp(aggregate)")
for alpha in [1e-3, 0.1, 0.5, 1.0, 2.0, 10.0, 1e3]:
    v = gar_kl([ad.constant(l) for l in losses], GarConfig(alpha=alpha))
    print(f"{alpha:<10g} {math.exp(v.item()):.6f}")

print(gar_limits_check(losses))

# The gradient weights each loss by its share of the power mean, so with a
# small alpha the largest loss gets almost all of it.
for alpha in (0.1, 1.0, 10.0):
    vs = [ad.variable(l) for l in losses]
    gar_kl(vs, GarConfig(alpha=alpha)).backward()
    w = np.array([v.grad * l for v, l in zip(vs, losses)])
    print(f"alpha {alpha:>4}: relative weights {np.round(w / w.sum(), 3)}")

# Losses spanning 300 orders of magnitude stay finite.
vs = [ad.variable(1e-12), ad.variable(1e300), ad.variable(1.0)]
out = gar_kl(vs, GarConfig(alpha=1.0))
out.backward()
print("extreme spread:", out.item(), [v.grad for v in vs])
