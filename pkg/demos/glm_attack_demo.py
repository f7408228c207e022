"""Closed-form reconstruction of one training point from an exactly fitted GLM.

The adversary knows every training point except one, plus the released
coefficient vector. For linear, ridge, and logistic regression the missing
point solves a linear system derived from the first-order optimality
condition, so recovery is exact up to solver tolerance.
"""

import numpy as np

from reconlab import glm

g = np.random.default_rng(0)

for family, lam in [("linear", 0.0), ("ridge", 1.0), ("logistic", 0.1)]:
    d, n = 10, 200
    X_fixed = np.hstack([np.ones((n, 1)), g.normal(size=(n, d))])
    if family == "logistic":
        Y_fixed = g.integers(0, 2, size=n).astype(float)
        y_secret = 1.0
    else:
        Y_fixed = g.normal(size=n)
        y_secret = float(g.normal())
    x_secret = np.concatenate([[1.0], g.normal(size=d)])

    spec = glm.GlmSpec(family, lam)
    theta = glm.fit_glm(
        np.vstack([X_fixed, x_secret[None, :]]),
        np.concatenate([Y_fixed, [y_secret]]),
        spec,
    )

    x_hat, y_hat = glm.reconstruct_glm(theta, X_fixed, Y_fixed, spec)
    print(f"{family} (lam={lam})")
    print(f"  max |x_hat - x|  {np.max(np.abs(x_hat - x_secret)):.2e}")
    print(f"  |y_hat - y|      {abs(y_hat - y_secret):.2e}")
