"""Box-constrained test functions for exercising the optimizer.

All functions take a 1-D numpy vector and return a scalar; every global
minimum value is 0.
"""

from __future__ import annotations

import numpy as np


def sphere(x: np.ndarray) -> float:
    """Sum of squares; global minimum 0 at the origin."""
    return float(np.dot(x, x))


def rastrigin(x: np.ndarray) -> float:
    """Highly multimodal; global minimum 0 at the origin."""
    return float(10.0 * x.size + (x * x - 10.0 * np.cos(2.0 * np.pi * x)).sum())


def rosenbrock(x: np.ndarray) -> float:
    """Curved valley; global minimum 0 at (1, ..., 1)."""
    return float((100.0 * (x[1:] - x[:-1] ** 2) ** 2 + (1.0 - x[:-1]) ** 2).sum())


def ackley(x: np.ndarray) -> float:
    """Nearly flat outer region with a deep central hole; minimum 0 at the origin."""
    n = x.size
    return float(
        -20.0 * np.exp(-0.2 * np.sqrt(np.dot(x, x) / n))
        - np.exp(np.cos(2.0 * np.pi * x).sum() / n)
        + 20.0
        + np.e
    )


# name -> (function, default one-dimensional bounds)
FUNCTIONS = {
    "sphere": (sphere, (-5.0, 5.0)),
    "rastrigin": (rastrigin, (-5.12, 5.12)),
    "rosenbrock": (rosenbrock, (-5.0, 10.0)),
    "ackley": (ackley, (-32.768, 32.768)),
}
