from dataclasses import dataclass
from typing import Optional

import numpy as np
from scipy.spatial.distance import pdist
from scipy.stats import gamma

from notears.acyclicity import NumericalError

MIN_SAMPLES = 4
FALLBACK_BANDWIDTH = 1.0


@dataclass
class ResidualSample:
    """
    Paired residuals of one variable and the domain label of every row.

    Labels are compared for equality only, so any bijective renaming of the
    domains describes the same sample.
    """

    residuals: np.ndarray
    domains: np.ndarray

    def __post_init__(self):
        self.residuals = np.asarray(self.residuals, dtype=np.float64).ravel()
        self.domains = np.asarray(self.domains).ravel()
        if self.residuals.shape[0] != self.domains.shape[0]:
            raise ValueError(
                f"Got {self.residuals.shape[0]} residuals and "
                f"{self.domains.shape[0]} domain labels"
            )
        if self.n < MIN_SAMPLES:
            raise ValueError(f"The HSIC test needs at least {MIN_SAMPLES} samples. Given {self.n}")
        if not np.all(np.isfinite(self.residuals)):
            raise NumericalError("Residuals contain NaN or infinite values")

    @property
    def n(self) -> int:
        return self.residuals.shape[0]

    @property
    def num_domains(self) -> int:
        return len(np.unique(self.domains))


def median_bandwidth(residuals: np.ndarray) -> float:
    """Median of the pairwise absolute differences; 1.0 when that median is 0."""
    distances = pdist(np.asarray(residuals, dtype=np.float64).reshape(-1, 1), "cityblock")
    width = float(np.median(distances)) if distances.size else 0.0
    return width if width > 0 else FALLBACK_BANDWIDTH


def residual_kernel(residuals: np.ndarray, bandwidth: float) -> np.ndarray:
    """Gaussian RBF kernel exp(-(r_i - r_j)^2 / (2 sigma^2))."""
    if not bandwidth > 0:
        raise NumericalError(f"Kernel bandwidth must be positive. Given {bandwidth}")
    diffs = residuals[:, None] - residuals[None, :]
    return np.exp(-(diffs**2) / (2.0 * bandwidth**2))


def domain_kernel(domains: np.ndarray) -> np.ndarray:
    """Delta kernel: 1 where two rows share a domain, else 0."""
    return (domains[:, None] == domains[None, :]).astype(np.float64)


def _one_hot(domains: np.ndarray) -> np.ndarray:
    _, codes = np.unique(domains, return_inverse=True)
    return np.eye(codes.max() + 1)[codes]


def _center(K: np.ndarray) -> np.ndarray:
    # H K H without forming H
    return K - K.mean(axis=0, keepdims=True) - K.mean(axis=1, keepdims=True) + K.mean()


class KernelMatrices:
    """Kernel matrices of one sample, shared by the statistic and both p-values."""

    def __init__(self, z: ResidualSample, bandwidth: Optional[float] = None):
        self.n = z.n
        self.bandwidth = median_bandwidth(z.residuals) if bandwidth is None else bandwidth
        self.K = residual_kernel(z.residuals, self.bandwidth)
        self.L = domain_kernel(z.domains)
        self.Kc = _center(self.K)
        self.domains = z.domains

    def statistic(self) -> float:
        return float(np.sum(self.Kc * self.L)) / self.n**2


def hsic_statistic(z: ResidualSample, bandwidth: Optional[float] = None) -> float:
    """
    Biased HSIC estimate (1/n^2) tr(K H L H) between residuals and domains.

    Args:
        z (ResidualSample): Residuals and domain labels, n >= 4.
        bandwidth (Optional[float]): RBF bandwidth; median heuristic when omitted.

    Returns:
        float: The statistic, non-negative up to rounding.
    """
    return KernelMatrices(z, bandwidth).statistic()


def gamma_pvalue_from_kernels(kernels: KernelMatrices) -> float:
    n = kernels.n
    Kc = kernels.Kc
    Lc = _center(kernels.L)
    test_stat = float(np.sum(Kc * Lc)) / n

    var_terms = (Kc * Lc / 6.0) ** 2
    variance = (np.sum(var_terms) - np.trace(var_terms)) / n / (n - 1)
    variance *= 72.0 * (n - 4) * (n - 5) / n / (n - 1) / (n - 2) / (n - 3)

    mu_x = (np.sum(kernels.K) - np.trace(kernels.K)) / n / (n - 1)
    mu_y = (np.sum(kernels.L) - np.trace(kernels.L)) / n / (n - 1)
    mean = (1.0 + mu_x * mu_y - mu_x - mu_y) / n

    if not (variance > 0 and mean > 0):
        raise NumericalError(
            f"Degenerate Gamma moments (mean={mean:.3g}, variance={variance:.3g})"
        )
    shape = mean**2 / variance
    scale = variance * n / mean
    return float(np.clip(gamma.sf(test_stat, shape, scale=scale), 0.0, 1.0))


def gamma_pvalue(z: ResidualSample, bandwidth: Optional[float] = None) -> float:
    """
    p-value of the HSIC independence test from a moment-matched Gamma
    approximation of the statistic's null distribution.

    Raises:
        NumericalError: When the estimated null mean or variance is not
            positive (e.g. a single domain or constant residuals).
    """
    return gamma_pvalue_from_kernels(KernelMatrices(z, bandwidth))


def permutation_pvalue_from_kernels(
    kernels: KernelMatrices, n_permutations: int, seed: int
) -> float:
    if n_permutations < 1:
        raise ValueError(f"n_permutations must be positive. Given {n_permutations}")
    rng = np.random.default_rng(seed)
    E = _one_hot(kernels.domains)
    observed = float(np.sum((kernels.Kc @ E) * E))
    exceed = 0
    for _ in range(n_permutations):
        E_perm = E[rng.permutation(kernels.n)]
        # sum(Kc * L_perm) = tr(E_perm^T Kc E_perm)
        if float(np.sum((kernels.Kc @ E_perm) * E_perm)) >= observed - 1e-12 * abs(observed):
            exceed += 1
    return (1.0 + exceed) / (n_permutations + 1.0)


def permutation_pvalue(
    z: ResidualSample,
    n_permutations: int = 1000,
    seed: int = 0,
    bandwidth: Optional[float] = None,
) -> float:
    """
    p-value of the HSIC test from randomly permuting the domain labels.

    Args:
        z (ResidualSample): Residuals and domain labels.
        n_permutations (int): Number of label permutations B.
        seed (int): Seed of the permutations.
        bandwidth (Optional[float]): RBF bandwidth; median heuristic when omitted.

    Returns:
        float: (1 + #{permuted statistic >= observed}) / (B + 1).
    """
    kernels = KernelMatrices(z, bandwidth)
    return permutation_pvalue_from_kernels(kernels, n_permutations, seed)
