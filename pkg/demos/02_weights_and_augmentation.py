"""A look at the two sampling primitives behind the model.

First the stick-breaking weights: with all coefficients at zero every stick
takes half of what remains, giving the geometric pattern; nonzero
coefficients make the weights covariate-dependent. Then the Polya-Gamma
sampler: draws match the closed-form mean tanh(c/2)/(2c) at any tilt.
"""

import numpy as np

from clsbp import stick_weights
from clsbp.distributions import pg_mean, sample_pg1_many
from clsbp.lsbp import WeightParams

# geometric pattern at zero coefficients
w = stick_weights(np.zeros(2), WeightParams(b=np.zeros((4, 2))))
print("weights at b = 0:", w, "(sum", w.sum(), ")")

# covariate dependence: the first stick grows with the covariate
b = np.array([[0.0, 1.5], [0.0, 0.0], [0.0, 0.0], [0.0, 0.0]])
for xv in (-2.0, 0.0, 2.0):
    w = stick_weights(np.array([1.0, xv]), WeightParams(b=b))
    print(f"x = {xv:+.0f}: first-stick weight {w[0]:.3f}, residual {w[-1]:.4f}")

# Polya-Gamma draws against the analytic mean
rng = np.random.default_rng(0)
print("\nPG(1, c) sample means vs tanh(c/2)/(2c):")
for c in (0.0, 0.5, 2.0, 5.0):
    draws = sample_pg1_many(np.full(50_000, c), rng)
    print(f"  c = {c:3.1f}: {draws.mean():.5f} vs {float(pg_mean(c)):.5f}")
