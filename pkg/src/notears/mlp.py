import os
from dataclasses import dataclass, field
from typing import Callable, Dict, List, Optional, Tuple

import numpy as np
from scipy.special import expit

from data_models.config_validator import Activation, ModelConfig
from notears.acyclicity import NumericalError
from utils import read_json_as_dict, save_json

MODEL_SET_FILE_NAME = "model_set.json"

# activation and its derivative expressed through the activation output
ACTIVATIONS: Dict[Activation, Tuple[Callable, Callable]] = {
    Activation.SIGMOID: (expit, lambda a: a * (1.0 - a)),
}


@dataclass
class MlpParams:
    """
    Parameters of the MLP modelling one variable from all d inputs.

    layer_weights[l] has shape m_{l+1} x m_l with m_0 = d and a final width
    of 1; layer_biases[l] has length m_{l+1}. Hidden layers apply the sigmoid,
    the output layer is affine.
    """

    layer_weights: List[np.ndarray]
    layer_biases: List[np.ndarray]

    def __post_init__(self):
        if len(self.layer_weights) < 1:
            raise ValueError("An MLP needs at least one layer")
        if len(self.layer_weights) != len(self.layer_biases):
            raise ValueError(
                f"Got {len(self.layer_weights)} weight matrices and "
                f"{len(self.layer_biases)} bias vectors"
            )
        for ell, (weights, biases) in enumerate(zip(self.layer_weights, self.layer_biases)):
            if weights.ndim != 2 or biases.shape != (weights.shape[0],):
                raise ValueError(
                    f"Layer {ell + 1}: weights {weights.shape} and biases "
                    f"{biases.shape} are inconsistent"
                )
            if ell > 0 and weights.shape[1] != self.layer_weights[ell - 1].shape[0]:
                raise ValueError(
                    f"Layer {ell + 1} expects {weights.shape[1]} inputs but layer "
                    f"{ell} has {self.layer_weights[ell - 1].shape[0]} units"
                )
        if self.layer_weights[-1].shape[0] != 1:
            raise ValueError("The output layer must have a single unit")

    @property
    def input_dim(self) -> int:
        return self.layer_weights[0].shape[1]

    @property
    def first_layer(self) -> np.ndarray:
        return self.layer_weights[0]

    def copy(self) -> "MlpParams":
        return MlpParams(
            layer_weights=[w.copy() for w in self.layer_weights],
            layer_biases=[b.copy() for b in self.layer_biases],
        )

    def equals(self, other: "MlpParams") -> bool:
        """Bit-level equality of all parameters."""
        return all(
            a.shape == b.shape and a.tobytes() == b.tobytes()
            for a, b in zip(
                self.layer_weights + self.layer_biases,
                other.layer_weights + other.layer_biases,
            )
        )


@dataclass
class ModelSet:
    """One fitted causal model: an MLP per variable plus the shared config."""

    models: List[MlpParams]
    config: ModelConfig = field(default_factory=ModelConfig)

    def __post_init__(self):
        d = len(self.models)
        for j, model in enumerate(self.models):
            if model.input_dim != d:
                raise ValueError(
                    f"Model {j} takes {model.input_dim} inputs, expected d={d}"
                )
            shapes = [w.shape for w in model.layer_weights]
            if shapes != [w.shape for w in self.models[0].layer_weights]:
                raise ValueError(f"Model {j} has a different architecture: {shapes}")

    @property
    def d(self) -> int:
        return len(self.models)

    def __getitem__(self, j: int) -> MlpParams:
        return self.models[j]

    def copy(self) -> "ModelSet":
        return ModelSet(
            models=[model.copy() for model in self.models],
            config=self.config.model_copy(),
        )


def init_model_set(d: int, config: ModelConfig, seed: int, scale: float = 0.1) -> ModelSet:
    """
    Fresh random parameters drawn uniformly from [-scale, scale].

    Column j of variable j's first layer is zero so that no variable
    predicts itself.

    Args:
        d (int): Number of variables.
        config (ModelConfig): Architecture of the MLPs.
        seed (int): Seed of the draws.
        scale (float): Half-width of the uniform initialization.

    Returns:
        ModelSet: The initialized models.
    """
    rng = np.random.default_rng(seed)
    widths = [d] + config.layer_sizes
    models = []
    for j in range(d):
        weights, biases = [], []
        for fan_in, fan_out in zip(widths[:-1], widths[1:]):
            weights.append(rng.uniform(-scale, scale, size=(fan_out, fan_in)))
            biases.append(rng.uniform(-scale, scale, size=fan_out))
        weights[0][:, j] = 0.0
        models.append(MlpParams(layer_weights=weights, layer_biases=biases))
    return ModelSet(models=models, config=config.model_copy())


def forward_with_cache(
    model: MlpParams, X: np.ndarray, activation: Activation = Activation.SIGMOID
) -> Tuple[np.ndarray, List[np.ndarray]]:
    """
    Forward pass keeping every layer's output for backpropagation.

    Returns:
        Tuple[np.ndarray, List[np.ndarray]]: Length-n predictions and the list
            [X, a_1, ..., a_h] of layer outputs.
    """
    if X.ndim != 2 or X.shape[1] != model.input_dim:
        raise ValueError(
            f"Input of shape {X.shape} does not match an MLP over "
            f"{model.input_dim} variables"
        )
    sigma, _ = ACTIVATIONS[activation]
    activations = [X]
    a = X
    last = len(model.layer_weights) - 1
    for ell, (weights, biases) in enumerate(zip(model.layer_weights, model.layer_biases)):
        z = a @ weights.T + biases
        a = z if ell == last else sigma(z)
        activations.append(a)
    return a[:, 0], activations


def forward(
    model: MlpParams, X: np.ndarray, config: Optional[ModelConfig] = None
) -> np.ndarray:
    """
    Prediction of one variable's MLP for every row of X.

    Args:
        model (MlpParams): The variable's parameters.
        X (np.ndarray): n x d input matrix.
        config (Optional[ModelConfig]): Supplies the hidden activation;
            sigmoid when omitted.

    Returns:
        np.ndarray: Length-n prediction vector.
    """
    activation = Activation.SIGMOID if config is None else config.activation
    predictions, _ = forward_with_cache(model, X, activation)
    if not np.all(np.isfinite(predictions)):
        raise NumericalError("MLP forward pass produced NaN or infinite values")
    return predictions


def backward(
    model: MlpParams,
    activations: List[np.ndarray],
    grad_output: np.ndarray,
    activation: Activation = Activation.SIGMOID,
) -> Tuple[List[np.ndarray], List[np.ndarray]]:
    """
    Backpropagates dL/d(prediction) through one MLP.

    Args:
        model (MlpParams): The variable's parameters.
        activations (List[np.ndarray]): Layer outputs from `forward_with_cache`.
        grad_output (np.ndarray): Length-n gradient with respect to the predictions.

    Returns:
        Tuple[List[np.ndarray], List[np.ndarray]]: Gradients of the layer
            weights and biases, shaped like the parameters.
    """
    _, sigma_prime = ACTIVATIONS[activation]
    num_layers = len(model.layer_weights)
    grad_weights = [None] * num_layers
    grad_biases = [None] * num_layers
    delta = grad_output[:, None]
    for ell in reversed(range(num_layers)):
        a_prev = activations[ell]
        grad_weights[ell] = delta.T @ a_prev
        grad_biases[ell] = delta.sum(axis=0)
        if ell > 0:
            delta = (delta @ model.layer_weights[ell]) * sigma_prime(a_prev)
    return grad_weights, grad_biases


def squared_adjacency(models: ModelSet) -> np.ndarray:
    """S[k, j] = squared L2 norm of column k of variable j's first layer."""
    return np.stack([np.sum(model.first_layer**2, axis=0) for model in models.models], axis=1)


def extract_adjacency(models: ModelSet) -> np.ndarray:
    """
    Weighted adjacency of a fitted model set.

    W[k, j] is the Euclidean norm of column k of variable j's first-layer
    weights; biases do not enter.

    Args:
        models (ModelSet): The fitted models.

    Returns:
        np.ndarray: d x d non-negative matrix.
    """
    return np.sqrt(squared_adjacency(models))


def _array_to_dict(array: np.ndarray) -> dict:
    return {"shape": list(array.shape), "data": array.ravel(order="C").tolist()}


def _array_from_dict(entry: dict) -> np.ndarray:
    return np.array(entry["data"], dtype=np.float64).reshape(entry["shape"], order="C")


def model_set_to_dict(models: ModelSet) -> dict:
    """JSON-ready document: config, shapes and row-major parameter arrays."""
    return {
        "d": models.d,
        "config": models.config.model_dump(mode="json"),
        "models": [
            {
                "layer_weights": [_array_to_dict(w) for w in model.layer_weights],
                "layer_biases": [_array_to_dict(b) for b in model.layer_biases],
            }
            for model in models.models
        ],
    }


def model_set_from_dict(document: dict) -> ModelSet:
    models = [
        MlpParams(
            layer_weights=[_array_from_dict(w) for w in entry["layer_weights"]],
            layer_biases=[_array_from_dict(b) for b in entry["layer_biases"]],
        )
        for entry in document["models"]
    ]
    if len(models) != document["d"]:
        raise ValueError(f"Checkpoint declares d={document['d']} but holds {len(models)} models")
    return ModelSet(models=models, config=ModelConfig.model_validate(document["config"]))


def save_model_set(models: ModelSet, file_path: str) -> None:
    """
    Save a model set checkpoint as JSON.

    Args:
        models (ModelSet): The models to save.
        file_path (str): Target file, or a directory to write `model_set.json` into.
    """
    if os.path.isdir(file_path):
        file_path = os.path.join(file_path, MODEL_SET_FILE_NAME)
    directory = os.path.dirname(file_path)
    if directory:
        os.makedirs(directory, exist_ok=True)
    save_json(file_path, model_set_to_dict(models))


def load_model_set(file_path: str) -> ModelSet:
    """
    Load a model set checkpoint.

    Args:
        file_path (str): Checkpoint file, or a directory holding `model_set.json`.

    Returns:
        ModelSet: The restored models.
    """
    if os.path.isdir(file_path):
        file_path = os.path.join(file_path, MODEL_SET_FILE_NAME)
    if not os.path.exists(file_path):
        raise FileNotFoundError(f"No such file or directory: '{file_path}'")
    return model_set_from_dict(read_json_as_dict(file_path))

