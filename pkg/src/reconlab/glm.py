"""Exact closed-form reconstruction attacks on generalized linear models.

A GLM trained to optimality pins the unknown training point through the
first-order optimality condition: the target's gradient contribution equals
minus the (known) contribution of the rest of the data. With an intercept
column this system solves in closed form for both features and label.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

__all__ = [
    "GlmSpec",
    "GlmError",
    "add_intercept",
    "glm_gradient",
    "fit_glm",
    "fit_glm_gd",
    "residual_system",
    "reconstruct_glm",
    "reconstruct_linreg_no_intercept",
]

DEFAULT_TOL = 1e-10
NEWTON_MAX_ITER = 100
DENOM_EPS = 1e-12


class GlmError(RuntimeError):
    pass


def _sigmoid(u):
    return 0.5 * (1.0 + np.tanh(0.5 * u))


@dataclass(frozen=True)
class GlmSpec:
    """family in {linear, logistic}; lam >= 0; ridge = linear with lam > 0."""

    family: str = "linear"
    lam: float = 0.0
    intercept: bool = True

    def __post_init__(self):
        fam = self.family.lower()
        if fam == "ridge":
            fam = "linear"
        if fam not in ("linear", "logistic"):
            raise ValueError(f"unknown GLM family {self.family!r}")
        object.__setattr__(self, "family", fam)
        if self.lam < 0:
            raise ValueError("lam must be nonnegative")

    def inverse_link(self, u):
        """b' = g^{-1}: identity for linear, sigmoid for logistic."""
        return u if self.family == "linear" else _sigmoid(u)

    def inverse_link_deriv(self, u):
        if self.family == "linear":
            return np.ones_like(u)
        s = _sigmoid(u)
        return s * (1.0 - s)


def add_intercept(X: np.ndarray) -> np.ndarray:
    """Prepend a ones column unless the first column is already all ones."""
    X = np.atleast_2d(np.asarray(X, dtype=np.float64))
    if X.shape[1] and np.all(X[:, 0] == 1.0):
        return X
    return np.hstack([np.ones((X.shape[0], 1)), X])


def glm_gradient(theta: np.ndarray, X: np.ndarray, Y: np.ndarray, spec: GlmSpec) -> np.ndarray:
    """Gradient of C(theta) = sum_i (b(<x_i,theta>) - <x_i,theta> y_i) + (lam/2)|theta|^2."""
    u = X @ theta
    return X.T @ (spec.inverse_link(u) - Y) + spec.lam * theta


def fit_glm(X: np.ndarray, Y: np.ndarray, spec: GlmSpec, tol: float = DEFAULT_TOL) -> np.ndarray:
    """Fit to gradient norm <= tol: normal equations for linear, Newton for logistic."""
    X = np.atleast_2d(np.asarray(X, dtype=np.float64))
    Y = np.asarray(Y, dtype=np.float64)
    if spec.intercept:
        X = add_intercept(X)
    d = X.shape[1]

    if spec.family == "linear":
        A = X.T @ X + spec.lam * np.eye(d)
        try:
            theta = np.linalg.solve(A, X.T @ Y)
        except np.linalg.LinAlgError as e:
            raise GlmError(f"singular system: {e}") from None
        # One iterative-refinement step to push the residual to fit tolerance.
        theta -= np.linalg.solve(A, glm_gradient(theta, X, Y, spec))
    else:
        theta = np.zeros(d)
        for _ in range(NEWTON_MAX_ITER):
            g = glm_gradient(theta, X, Y, spec)
            if np.linalg.norm(g) <= tol:
                break
            w = spec.inverse_link_deriv(X @ theta)
            H = X.T @ (w[:, None] * X) + spec.lam * np.eye(d)
            try:
                step = np.linalg.solve(H, g)
            except np.linalg.LinAlgError as e:
                raise GlmError(f"singular Hessian: {e}") from None
            theta = theta - step

    g = glm_gradient(theta, X, Y, spec)
    if not np.isfinite(theta).all() or np.linalg.norm(g) > tol:
        raise GlmError(
            f"did not reach fit tolerance: |grad| = {np.linalg.norm(g):.3e} > {tol:.1e}"
        )
    return theta


def fit_glm_gd(X: np.ndarray, Y: np.ndarray, spec: GlmSpec, tol: float = DEFAULT_TOL,
               learning_rate: float = None, max_iter: int = 2_000_000) -> np.ndarray:
    """Plain gradient descent to the same tolerance (training-algorithm independence)."""
    X = np.atleast_2d(np.asarray(X, dtype=np.float64))
    Y = np.asarray(Y, dtype=np.float64)
    if spec.intercept:
        X = add_intercept(X)
    d = X.shape[1]
    if learning_rate is None:
        # 1/L for the quadratic upper bound of the objective curvature.
        smax = np.linalg.norm(X, 2) ** 2
        curv = smax if spec.family == "linear" else 0.25 * smax
        learning_rate = 1.0 / (curv + spec.lam)
    theta = np.zeros(d)
    for _ in range(max_iter):
        g = glm_gradient(theta, X, Y, spec)
        if np.linalg.norm(g) <= tol:
            return theta
        theta = theta - learning_rate * g
    raise GlmError("gradient descent did not converge")


def residual_system(theta: np.ndarray, X_fixed: np.ndarray, Y_fixed: np.ndarray,
                    spec: GlmSpec) -> np.ndarray:
    """The unknown point's gradient contribution: -(X'B + lam*theta), B = g^{-1}(X theta) - Y."""
    B = spec.inverse_link(X_fixed @ theta) - Y_fixed
    return -(X_fixed.T @ B + spec.lam * theta)


def reconstruct_glm(theta: np.ndarray, X_fixed: np.ndarray, Y_fixed: np.ndarray,
                    spec: GlmSpec, tol: float = DEFAULT_TOL):
    """Closed-form recovery of the held-out (x, y) from an exactly optimal GLM.

    Requires the intercept convention (first feature coordinate equals 1).
    The label is recovered from the intercept equation; multiple published
    variants of the y expression exist, so every candidate is scored by
    back-substituting into the optimality condition and the one driving the
    gradient norm below tolerance is returned.
    """
    theta = np.asarray(theta, dtype=np.float64)
    X_fixed = np.atleast_2d(np.asarray(X_fixed, dtype=np.float64))
    Y_fixed = np.asarray(Y_fixed, dtype=np.float64)
    if not np.all(X_fixed[:, 0] == 1.0):
        raise GlmError("reconstruct_glm requires an intercept column of ones")

    B = spec.inverse_link(X_fixed @ theta) - Y_fixed
    denom = float(B.sum() + spec.lam * theta[0])  # X_1' B + lam * theta_1
    if abs(denom) < DENOM_EPS:
        raise GlmError(f"near-zero denominator {denom:.3e}")

    x = (X_fixed.T @ B + spec.lam * theta) / denom
    x[0] = 1.0
    mu = float(spec.inverse_link(x @ theta))

    candidates = (
        mu + denom,                              # from the optimality identity
        mu - denom,                              # proof-sketch sign variant
        mu + spec.lam * B.sum() * theta[0],      # theorem-statement variant
    )
    best, best_norm = None, np.inf
    for y in candidates:
        Xf = np.vstack([X_fixed, x[None, :]])
        Yf = np.concatenate([Y_fixed, [y]])
        gnorm = np.linalg.norm(glm_gradient(theta, Xf, Yf, spec))
        if gnorm < best_norm:
            best, best_norm = y, gnorm
    if best_norm > 10 * tol:
        raise GlmError(
            f"no label candidate satisfies optimality (best |grad| = {best_norm:.3e})"
        )
    return x, float(best)


def reconstruct_linreg_no_intercept(theta: np.ndarray, X_fixed: np.ndarray,
                                    Y_fixed: np.ndarray, y: float):
    """Quadratic-root attack on intercept-free least squares given the known label.

    Returns both candidate feature vectors; at least one reproduces the target
    when the model was trained to exact optimality.
    """
    theta = np.asarray(theta, dtype=np.float64)
    X_fixed = np.atleast_2d(np.asarray(X_fixed, dtype=np.float64))
    Y_fixed = np.asarray(Y_fixed, dtype=np.float64)

    r = X_fixed @ theta - Y_fixed
    if np.linalg.norm(r) < DENOM_EPS:
        raise GlmError("degenerate case: fixed-set residual is zero")
    v = X_fixed.T @ r
    c = float(r @ (X_fixed @ theta))
    disc = y * y - 4.0 * c
    if disc < 0:
        raise GlmError(f"negative discriminant {disc:.3e}")
    if abs(c) < DENOM_EPS:
        # Quadratic degenerates to -alpha*y + 1 = 0.
        if abs(y) < DENOM_EPS:
            raise GlmError("degenerate case: both quadratic coefficients vanish")
        alpha = 1.0 / y
        return v * alpha, v * alpha
    root = np.sqrt(disc)
    return v * ((y + root) / (2.0 * c)), v * ((y - root) / (2.0 * c))
