"""Single-stream embedding network.

One small convolutional backbone processes natural images and encoded-text
images alike. Canvases are scaled to ``[0, 1]``, pass through the configured
stages (3×3 same-padded convolutions with an activation, and ``k×k`` average
pooling), are flattened into a linear feature layer (the embedding, no
activation) and finally into a linear classifier used only for the softmax
supervision signal.

All arithmetic is float64 so that gradients can be checked against finite
differences.
"""

import logging
from concurrent.futures import ThreadPoolExecutor
from typing import Sequence

import numpy as np

from xmodal.core.exceptions import CheckpointError, DimensionMismatchError
from xmodal.schemas.training import LayerSpec, parse_backbone

logger = logging.getLogger(__name__)

Shape = tuple[int, int, int]


def plan_shapes(layers: Sequence[LayerSpec], input_shape: Shape) -> list[Shape]:
    """Activation shape after every stage, input first.

    Raises:
        DimensionMismatchError: A pooling stage does not divide its input.
    """
    h, w, c = input_shape
    shapes = [(h, w, c)]
    for layer in layers:
        if layer.kind == "pool":
            if h % layer.size or w % layer.size:
                raise DimensionMismatchError(
                    f"pool:{layer.size} does not divide a {h}×{w} activation"
                )
            h, w = h // layer.size, w // layer.size
        else:
            c = layer.size
        shapes.append((h, w, c))
    return shapes


class ModelParams:
    """Trainable weights of the backbone, feature layer and classifier.

    Tensors are kept in a name → array mapping whose insertion order is the
    canonical parameter order (used for checkpoints and the optimizer).
    """

    def __init__(
        self,
        backbone: str,
        input_shape: Shape,
        feature_dim: int,
        num_classes: int,
        tensors: dict[str, np.ndarray],
    ):
        self.backbone = backbone
        self.layers = parse_backbone(backbone)
        self.input_shape = tuple(int(v) for v in input_shape)
        self.feature_dim = int(feature_dim)
        self.num_classes = int(num_classes)
        self.tensors = {name: np.asarray(t, dtype=np.float64) for name, t in tensors.items()}
        expected = expected_shapes(self.layers, self.input_shape, feature_dim, num_classes)
        if list(expected) != list(self.tensors):
            raise CheckpointError(
                f"parameter names {list(self.tensors)} do not match backbone {list(expected)}"
            )
        for name, shape in expected.items():
            if self.tensors[name].shape != shape:
                raise CheckpointError(
                    f"{name} has shape {self.tensors[name].shape}, expected {shape}"
                )

    def __getitem__(self, name: str) -> np.ndarray:
        return self.tensors[name]

    @property
    def names(self) -> list[str]:
        return list(self.tensors)

    def copy(self) -> "ModelParams":
        return ModelParams(
            self.backbone,
            self.input_shape,
            self.feature_dim,
            self.num_classes,
            {name: t.copy() for name, t in self.tensors.items()},
        )

    def is_finite(self) -> bool:
        return all(np.all(np.isfinite(t)) for t in self.tensors.values())

    def spec_string(self) -> str:
        h, w, c = self.input_shape
        return (
            f"input={h}x{w}x{c};feature={self.feature_dim};"
            f"classes={self.num_classes};backbone={self.backbone}"
        )

    @staticmethod
    def parse_spec_string(spec: str) -> dict:
        try:
            fields = dict(part.split("=", 1) for part in spec.split(";"))
            h, w, c = (int(v) for v in fields["input"].split("x"))
            return {
                "backbone": fields["backbone"],
                "input_shape": (h, w, c),
                "feature_dim": int(fields["feature"]),
                "num_classes": int(fields["classes"]),
            }
        except (KeyError, ValueError) as e:
            raise CheckpointError(f"malformed backbone spec '{spec}': {e}")

    def __eq__(self, other: object) -> bool:
        if not isinstance(other, ModelParams):
            return NotImplemented
        return self.spec_string() == other.spec_string() and all(
            np.array_equal(self.tensors[n], other.tensors[n]) for n in self.tensors
        )

    __hash__ = None


def expected_shapes(
    layers: Sequence[LayerSpec], input_shape: Shape, feature_dim: int, num_classes: int
) -> dict[str, tuple[int, ...]]:
    shapes = plan_shapes(layers, input_shape)
    out: dict[str, tuple[int, ...]] = {}
    for i, layer in enumerate(layers):
        if layer.kind == "conv":
            c_in = shapes[i][2]
            out[f"stage{i}.W"] = (9 * c_in, layer.size)
            out[f"stage{i}.b"] = (layer.size,)
    h, w, c = shapes[-1]
    out["fc.W"] = (h * w * c, feature_dim)
    out["fc.b"] = (feature_dim,)
    out["cls.W"] = (feature_dim, num_classes)
    out["cls.b"] = (num_classes,)
    return out


def init_params(
    backbone: str,
    input_shape: Shape,
    feature_dim: int,
    num_classes: int,
    rng: np.random.Generator,
) -> ModelParams:
    """He-initialized convolutions, scaled-normal linear layers, zero biases."""
    layers = parse_backbone(backbone)
    tensors = {}
    for name, shape in expected_shapes(layers, input_shape, feature_dim, num_classes).items():
        if name.endswith(".b"):
            tensors[name] = np.zeros(shape)
        elif name.startswith("stage"):
            tensors[name] = rng.normal(0.0, np.sqrt(2.0 / shape[0]), size=shape)
        else:
            tensors[name] = rng.normal(0.0, np.sqrt(1.0 / shape[0]), size=shape)
    return ModelParams(backbone, input_shape, feature_dim, num_classes, tensors)


def to_input(canvases: np.ndarray | Sequence[np.ndarray]) -> np.ndarray:
    """Stack byte canvases into a ``B × H × W × 3`` float64 batch in [0, 1]."""
    return np.asarray(canvases, dtype=np.float64) / 255.0


def _im2col(x: np.ndarray) -> np.ndarray:
    b, h, w, c = x.shape
    xp = np.pad(x, ((0, 0), (1, 1), (1, 1), (0, 0)))
    return np.concatenate(
        [xp[:, dy : dy + h, dx : dx + w, :] for dy in range(3) for dx in range(3)],
        axis=3,
    )


def _col2im(d_cols: np.ndarray, channels: int) -> np.ndarray:
    b, h, w, _ = d_cols.shape
    dxp = np.zeros((b, h + 2, w + 2, channels))
    j = 0
    for dy in range(3):
        for dx in range(3):
            block = d_cols[..., j * channels : (j + 1) * channels]
            dxp[:, dy : dy + h, dx : dx + w, :] += block
            j += 1
    return dxp[:, 1:-1, 1:-1, :]


def _activate(z: np.ndarray, activation: str) -> np.ndarray:
    return np.tanh(z) if activation == "tanh" else np.maximum(z, 0.0)


def _activation_grad(z: np.ndarray, a: np.ndarray, activation: str) -> np.ndarray:
    return 1.0 - a * a if activation == "tanh" else (z > 0).astype(np.float64)


def backbone_forward(params: ModelParams, x: np.ndarray) -> tuple[np.ndarray, list]:
    """Features for a float batch, plus the caches needed by :func:`backbone_backward`."""
    if x.shape[1:] != params.input_shape:
        raise DimensionMismatchError(
            f"input canvas {x.shape[1:]} does not match network input {params.input_shape}"
        )
    caches = []
    for i, layer in enumerate(params.layers):
        if layer.kind == "pool":
            b, h, w, c = x.shape
            k = layer.size
            caches.append(None)
            x = x.reshape(b, h // k, k, w // k, k, c).mean(axis=(2, 4))
        else:
            cols = _im2col(x)
            z = cols @ params[f"stage{i}.W"] + params[f"stage{i}.b"]
            a = _activate(z, layer.activation)
            caches.append((cols, z, a, x.shape[3]))
            x = a
    flat = x.reshape(x.shape[0], -1)
    caches.append((flat, x.shape))
    return flat @ params["fc.W"] + params["fc.b"], caches


def backbone_backward(
    params: ModelParams, caches: list, d_features: np.ndarray
) -> dict[str, np.ndarray]:
    """Gradients of the backbone and feature layer given ``dL/dfeatures``."""
    grads: dict[str, np.ndarray] = {}
    flat, shape = caches[-1]
    grads["fc.W"] = flat.T @ d_features
    grads["fc.b"] = d_features.sum(axis=0)
    dx = (d_features @ params["fc.W"].T).reshape(shape)
    for i in range(len(params.layers) - 1, -1, -1):
        layer = params.layers[i]
        if layer.kind == "pool":
            b, h, w, c = dx.shape
            k = layer.size
            spread = np.broadcast_to(dx[:, :, None, :, None, :] / (k * k), (b, h, k, w, k, c))
            dx = spread.reshape(b, h * k, w * k, c)
        else:
            cols, z, a, c_in = caches[i]
            dz = dx * _activation_grad(z, a, layer.activation)
            n_cols = cols.shape[3]
            grads[f"stage{i}.W"] = cols.reshape(-1, n_cols).T @ dz.reshape(-1, layer.size)
            grads[f"stage{i}.b"] = dz.sum(axis=(0, 1, 2))
            if i > 0:
                dx = _col2im(dz @ params[f"stage{i}.W"].T, c_in)
    return grads


def forward_batch(
    params: ModelParams,
    canvases: np.ndarray | Sequence[np.ndarray],
    chunk: int = 64,
    workers: int = 1,
) -> np.ndarray:
    """Features for many canvases, ``len(canvases) × feature_dim``, input order."""
    n = len(canvases)
    if n == 0:
        return np.zeros((0, params.feature_dim))
    starts = range(0, n, chunk)

    def run(start: int) -> np.ndarray:
        features, _ = backbone_forward(params, to_input(canvases[start : start + chunk]))
        return features

    if workers > 1 and len(starts) > 1:
        with ThreadPoolExecutor(max_workers=workers) as pool:
            parts = list(pool.map(run, starts))
    else:
        parts = [run(start) for start in starts]
    return np.concatenate(parts, axis=0)


def forward(params: ModelParams, canvas: np.ndarray) -> np.ndarray:
    """Feature vector of one canvas."""
    canvas = np.asarray(canvas)
    if canvas.shape != params.input_shape:
        raise DimensionMismatchError(
            f"canvas {canvas.shape} does not match network input {params.input_shape}"
        )
    return forward_batch(params, canvas[None])[0]


def classify(params: ModelParams, features: np.ndarray) -> np.ndarray:
    """Class logits from features."""
    return features @ params["cls.W"] + params["cls.b"]


def recenter_features(params: ModelParams, mean: np.ndarray) -> None:
    """Shift the feature layer so that ``mean`` maps to the origin.

    The classifier bias absorbs the shift, so logits are unchanged. Softmax
    and center loss are translation invariant and keep their values.
    """
    mean = np.asarray(mean, dtype=np.float64)
    if mean.shape != (params.feature_dim,):
        raise DimensionMismatchError(
            f"feature mean has shape {mean.shape}, expected ({params.feature_dim},)"
        )
    params.tensors["cls.b"] += mean @ params["cls.W"]
    params.tensors["fc.b"] -= mean
