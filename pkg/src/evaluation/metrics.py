from dataclasses import dataclass
from typing import TYPE_CHECKING, List, Optional, Sequence

import numpy as np

if TYPE_CHECKING:
    from cicme.engine import CicmeResult

DEFAULT_THRESHOLD = 0.3


def threshold(W: np.ndarray, tau: float = DEFAULT_THRESHOLD) -> np.ndarray:
    """
    Binary graph of the edges whose weight strictly exceeds tau.

    Args:
        W (np.ndarray): d x d weighted adjacency, entry (k, j) for k -> j.
        tau (float): Positive cut-off.

    Returns:
        np.ndarray: d x d integer matrix in {0, 1} with a zero diagonal.
    """
    if not tau > 0:
        raise ValueError(f"Threshold must be positive. Given {tau}")
    W = np.asarray(W)
    if W.ndim != 2 or W.shape[0] != W.shape[1]:
        raise ValueError(f"Expected a square matrix. Given shape {W.shape}")
    graph = (W > tau).astype(int)
    np.fill_diagonal(graph, 0)
    return graph


def _check_pair(estimated: np.ndarray, truth: np.ndarray) -> None:
    if estimated.shape != truth.shape or estimated.ndim != 2:
        raise ValueError(
            f"Graphs must be square and of equal size. Given {estimated.shape} "
            f"and {truth.shape}"
        )


def shd(estimated: np.ndarray, truth: np.ndarray) -> int:
    """
    Structural Hamming distance.

    Every unordered pair of nodes whose configuration (no edge, k -> j,
    j -> k) differs counts 1, so a missing, an extra and a reversed edge
    each cost one operation.
    """
    estimated = np.asarray(estimated) != 0
    truth = np.asarray(truth) != 0
    _check_pair(estimated, truth)
    differs = (estimated != truth) | (estimated.T != truth.T)
    return int(np.triu(differs, k=1).sum())


def local_shd(estimated: np.ndarray, truth: np.ndarray, j: int) -> int:
    """Size of the symmetric difference of variable j's parent sets."""
    estimated = np.asarray(estimated) != 0
    truth = np.asarray(truth) != 0
    _check_pair(estimated, truth)
    if not 0 <= j < truth.shape[0]:
        raise ValueError(f"Variable index {j} outside [0, {truth.shape[0]})")
    return int(np.sum(estimated[:, j] != truth[:, j]))


def local_shds(estimated: np.ndarray, truth: np.ndarray) -> List[int]:
    return [local_shd(estimated, truth, j) for j in range(np.asarray(truth).shape[0])]


@dataclass
class EvalRecord:
    """
    Scores of one method on one dataset.

    Per-domain lists are indexed by domain k - 1; a domain whose fit failed
    holds None and is left out of `mean_shd`. domain_lshd[k][j] scores the
    domain-k estimate; pooled_lshd[k][j] scores the thresholded pooled graph
    against domain k's truth and is only set for methods that fit the pooled
    data. `stable` carries the verdicts of the stability test when it ran.
    """

    domain_shd: List[Optional[int]]
    mean_shd: float
    domain_lshd: List[Optional[List[int]]]
    pooled_lshd: Optional[List[List[int]]] = None
    stable: Optional[List[bool]] = None

    def __post_init__(self):
        if all(value is None for value in self.domain_shd):
            raise ValueError("An evaluation needs at least one scored domain")
        if len(self.domain_lshd) != len(self.domain_shd):
            raise ValueError(
                f"Got {len(self.domain_lshd)} LSHD rows for {len(self.domain_shd)} domains"
            )

    @property
    def failed_domains(self) -> List[int]:
        """1-based indices of the domains without a score."""
        return [k for k, value in enumerate(self.domain_shd, start=1) if value is None]

    def mean_pooled_lshd(self, j: int) -> Optional[float]:
        """Pooled-graph LSHD of variable j averaged over domains."""
        if self.pooled_lshd is None:
            return None
        return float(np.mean([row[j] for row in self.pooled_lshd]))


def evaluate(
    result: "CicmeResult",
    truths: Sequence[np.ndarray],
    tau: float = DEFAULT_THRESHOLD,
) -> EvalRecord:
    """
    Scores a method's per-domain graphs against the per-domain truths.

    A domain whose fit failed keeps a None entry; at least one domain must
    have been fitted.

    Args:
        result (CicmeResult): Output of the engine.
        truths (Sequence[np.ndarray]): Binary ground truth per domain.
        tau (float): Threshold applied to every weighted adjacency.

    Returns:
        EvalRecord: SHD and LSHD scores.
    """
    if len(truths) != result.num_domains:
        raise ValueError(
            f"Got {len(truths)} ground-truth graphs for {result.num_domains} domains"
        )
    domain_shd, domain_lshd = [], []
    for W, truth in zip(result.domain_W, truths):
        if W is None:
            domain_shd.append(None)
            domain_lshd.append(None)
            continue
        estimated = threshold(W, tau)
        domain_shd.append(shd(estimated, truth))
        domain_lshd.append(local_shds(estimated, truth))
    scored = [value for value in domain_shd if value is not None]
    if not scored:
        raise ValueError("Every domain fit failed; nothing to evaluate")

    pooled_lshd = None
    if result.W_pool is not None:
        pooled = threshold(result.W_pool, tau)
        pooled_lshd = [local_shds(pooled, truth) for truth in truths]
    return EvalRecord(
        domain_shd=domain_shd,
        mean_shd=float(np.mean(scored)),
        domain_lshd=domain_lshd,
        pooled_lshd=pooled_lshd,
        stable=None if result.stability is None else result.stability.verdicts,
    )
