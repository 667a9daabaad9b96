from collections import Counter
from typing import List, Optional

import networkx as nx
import numpy as np
from pydantic import BaseModel, Field, ValidationError, field_validator, model_validator


class Edge(BaseModel):
    """
    A directed edge parent -> child of a linear mechanism with its weight.
    """

    parent: int = Field(ge=0)
    child: int = Field(ge=0)
    weight: float


class FcmSpec(BaseModel):
    """
    A linear additive-noise structural causal model over `d` variables.

    Every variable is the weighted sum of its parents plus Gaussian noise
    N(noise_means[j], noise_stds[j]**2). A noise std of 0 encodes a constant
    (degenerate) noise equal to the mean.
    """

    d: int = Field(ge=1)
    edges: List[Edge]
    noise_means: List[float]
    noise_stds: List[float]
    variable_names: List[str]

    @field_validator("noise_stds")
    @classmethod
    def non_negative_stds(cls, v):
        if any(std < 0 for std in v):
            raise ValueError(f"Noise standard deviations must be non-negative. Given {v}")
        return v

    @field_validator("variable_names")
    @classmethod
    def unique_variable_names(cls, v):
        duplicates = [item for item, count in Counter(v).items() if count > 1]
        if duplicates:
            raise ValueError(
                f"Duplicate variable names found in spec: `{', '.join(duplicates)}`"
            )
        return v

    @model_validator(mode="after")
    def check_structure(self):
        for field in ("noise_means", "noise_stds", "variable_names"):
            if len(getattr(self, field)) != self.d:
                raise ValueError(
                    f"'{field}' must have length d={self.d}. "
                    f"Given {len(getattr(self, field))}"
                )
        pairs = []
        for edge in self.edges:
            if edge.parent >= self.d or edge.child >= self.d:
                raise ValueError(
                    f"Edge ({edge.parent}, {edge.child}) references a variable "
                    f"outside [0, {self.d})"
                )
            if edge.parent == edge.child:
                raise ValueError(f"Self-loop on variable {edge.parent} is not allowed")
            pairs.append((edge.parent, edge.child))
        duplicates = [pair for pair, count in Counter(pairs).items() if count > 1]
        if duplicates:
            raise ValueError(f"Duplicate edges found in spec: {duplicates}")
        if not nx.is_directed_acyclic_graph(self.graph()):
            raise ValueError(f"Edge list {pairs} does not induce a DAG")
        return self

    def graph(self) -> nx.DiGraph:
        """The edge list as a networkx digraph over nodes 0..d-1."""
        graph = nx.DiGraph()
        graph.add_nodes_from(range(self.d))
        graph.add_weighted_edges_from((e.parent, e.child, e.weight) for e in self.edges)
        return graph

    def topological_order(self) -> List[int]:
        """Variable indices in a topological order (ties broken by index)."""
        return list(nx.lexicographical_topological_sort(self.graph()))

    def weight_matrix(self) -> np.ndarray:
        """d x d matrix B with B[k, j] the weight of edge k -> j."""
        weights = np.zeros((self.d, self.d))
        for edge in self.edges:
            weights[edge.parent, edge.child] = edge.weight
        return weights

    def find_edge(self, parent: int, child: int) -> Optional[Edge]:
        for edge in self.edges:
            if edge.parent == parent and edge.child == child:
                return edge
        return None


class EdgeOverride(BaseModel):
    """Replacement weight of an existing edge. A weight of 0 removes the edge."""

    parent: int = Field(ge=0)
    child: int = Field(ge=0)
    weight: float


class NoiseOverride(BaseModel):
    """Replacement noise parameters of one variable; unset fields keep the base value."""

    variable: int = Field(ge=0)
    mean: Optional[float] = None
    std: Optional[float] = Field(default=None, ge=0)


class DomainOverrides(BaseModel):
    edge_weights: List[EdgeOverride] = []
    noise: List[NoiseOverride] = []


class DomainSpec(BaseModel):
    """
    The ground-truth model of one domain: a base FcmSpec plus per-domain
    replacements of edge weights and noise parameters.
    """

    base: FcmSpec
    k: int = Field(ge=1)
    overrides: DomainOverrides = DomainOverrides()

    @model_validator(mode="after")
    def overrides_reference_existing(self):
        for override in self.overrides.edge_weights:
            if self.base.find_edge(override.parent, override.child) is None:
                raise ValueError(
                    f"Edge override ({override.parent}, {override.child}) does not "
                    "reference an existing edge"
                )
        for override in self.overrides.noise:
            if override.variable >= self.base.d:
                raise ValueError(
                    f"Noise override references variable {override.variable} "
                    f"outside [0, {self.base.d})"
                )
        return self

    def effective_spec(self) -> FcmSpec:
        """The base spec with this domain's overrides applied."""
        spec = self.base.model_copy(deep=True)
        for override in self.overrides.edge_weights:
            spec.find_edge(override.parent, override.child).weight = override.weight
        for override in self.overrides.noise:
            if override.mean is not None:
                spec.noise_means[override.variable] = override.mean
            if override.std is not None:
                spec.noise_stds[override.variable] = override.std
        return spec

    def true_adjacency(self) -> np.ndarray:
        """Binary d x d ground-truth graph; edges with effective weight 0 are absent."""
        return (self.effective_spec().weight_matrix() != 0).astype(int)


def validate_domain_spec_dict(spec_dict: dict) -> DomainSpec:
    """
    Validate a domain spec given as a python dictionary.

    Args:
        spec_dict (dict): domain spec as a python dictionary

    Raises:
        ValueError: if the spec is invalid

    Returns:
        DomainSpec: the validated domain spec
    """
    try:
        return DomainSpec.model_validate(spec_dict)
    except ValidationError as exc:
        raise ValueError(f"Invalid domain spec: {exc}") from exc
