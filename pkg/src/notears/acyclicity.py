from typing import Tuple

import numpy as np
import scipy.linalg as slin


class NumericalError(ArithmeticError):
    """Raised when a computation produces non-finite values."""


def acyclicity_from_squared(S: np.ndarray) -> Tuple[float, np.ndarray]:
    """
    Evaluates h = tr(e^S) - d and its gradient (e^S)^T with respect to S,
    where S is the Hadamard square of a weighted adjacency matrix.

    Args:
        S (np.ndarray): d x d non-negative matrix.

    Returns:
        Tuple[float, np.ndarray]: h and dh/dS.
    """
    d = S.shape[0]
    with np.errstate(over="ignore", invalid="ignore"):
        E = slin.expm(S)
    if not np.all(np.isfinite(E)):
        raise NumericalError(
            f"Matrix exponential overflowed for d={d}; "
            f"largest entry of W o W is {np.max(S):.4g}"
        )
    h = float(np.trace(E) - d)
    return h, E.T


def acyclicity(W: np.ndarray) -> Tuple[float, np.ndarray]:
    """
    Smooth acyclicity measure h(W) = tr(e^{W o W}) - d.

    h is non-negative and zero exactly when the support of W is acyclic.

    Args:
        W (np.ndarray): d x d weighted adjacency matrix with finite entries.

    Returns:
        Tuple[float, np.ndarray]: h and its gradient (e^{W o W})^T o 2W.
    """
    W = np.asarray(W, dtype=np.float64)
    if W.ndim != 2 or W.shape[0] != W.shape[1]:
        raise ValueError(f"W must be a square matrix. Given shape {W.shape}")
    if not np.all(np.isfinite(W)):
        raise NumericalError("W contains NaN or infinite entries")
    h, grad_S = acyclicity_from_squared(W * W)
    return h, grad_S * 2 * W
