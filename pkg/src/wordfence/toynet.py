"""A small dilated-convolution segmentation network with hand-written backprop.

Layout: three 3x3 convolutions with ReLU form the trunk (1 -> 16 -> 16 -> 16
channels); three parallel 3x3 heads with dilations 1, 2 and 4 map the trunk
features to class scores, and the head outputs are summed. Everything is
stride 1 with zero padding, so logits have the input's spatial size.
"""

from __future__ import annotations

import json
import logging
from dataclasses import dataclass, field, replace
from pathlib import Path

import numpy as np

from wordfence.errors import FormatError, InvalidInput, InvalidState
from wordfence.formats import decode_ften, encode_ften
from wordfence.grid import NUM_CLASSES, as_float_grid
from wordfence.wsloss import weighted_softmax_loss

log = logging.getLogger(__name__)

TRUNK_CHANNELS = 16
HEAD_DILATIONS = (1, 2, 4)
KERNEL_SIZE = 3


@dataclass(frozen=True)
class ConvLayer:
    kernel: np.ndarray  # (k, k, c_in, c_out)
    bias: np.ndarray  # (c_out,)
    dilation: int = 1

    def __post_init__(self):
        k = self.kernel.shape[0]
        if self.kernel.ndim != 4 or self.kernel.shape[1] != k or k % 2 == 0:
            raise InvalidInput(f"kernel must be (k, k, c_in, c_out) with odd k, got {self.kernel.shape}")
        if self.bias.shape != (self.kernel.shape[3],):
            raise InvalidInput(f"bias shape {self.bias.shape} does not match kernel {self.kernel.shape}")
        if self.dilation < 1:
            raise InvalidInput(f"dilation must be >= 1, got {self.dilation}")

    @property
    def size(self) -> int:
        return self.kernel.shape[0]

    @property
    def in_channels(self) -> int:
        return self.kernel.shape[2]

    @property
    def out_channels(self) -> int:
        return self.kernel.shape[3]

    @property
    def padding(self) -> int:
        return (self.size - 1) // 2 * self.dilation

    @property
    def span(self) -> int:
        return (self.size - 1) * self.dilation + 1


@dataclass(frozen=True)
class NetworkParams:
    trunk: tuple[ConvLayer, ...]
    heads: tuple[ConvLayer, ...]

    def layers(self) -> list[tuple[str, ConvLayer]]:
        named = [(f"trunk{i}", layer) for i, layer in enumerate(self.trunk)]
        return named + [(f"head_d{layer.dilation}", layer) for layer in self.heads]

    def map(self, fn) -> NetworkParams:
        """Apply ``fn(layer) -> layer`` to every layer."""
        return NetworkParams(tuple(fn(layer) for layer in self.trunk), tuple(fn(layer) for layer in self.heads))

    def sgd_step(self, grads: NetworkParams, learning_rate: float) -> NetworkParams:
        def step(pair):
            p, g = pair
            return replace(p, kernel=p.kernel - learning_rate * g.kernel, bias=p.bias - learning_rate * g.bias)

        return NetworkParams(tuple(map(step, zip(self.trunk, grads.trunk))),
                             tuple(map(step, zip(self.heads, grads.heads))))

    def flat(self) -> np.ndarray:
        return np.concatenate([np.concatenate([l.kernel.ravel(), l.bias.ravel()]) for _, l in self.layers()])

    @property
    def out_channels(self) -> int:
        return self.heads[0].out_channels


def build_params(rng: np.random.Generator | None = None, init_scale: float = 0.1,
                 in_channels: int = 1, num_classes: int = NUM_CLASSES,
                 width: int = TRUNK_CHANNELS, dilations=HEAD_DILATIONS) -> NetworkParams:
    """Kernels drawn from uniform(-init_scale, init_scale); biases start at zero.

    With ``rng=None`` every weight is zero.
    """
    def layer(c_in, c_out, dilation):
        shape = (KERNEL_SIZE, KERNEL_SIZE, c_in, c_out)
        kernel = np.zeros(shape) if rng is None else rng.uniform(-init_scale, init_scale, size=shape)
        return ConvLayer(kernel, np.zeros(c_out), dilation)

    trunk = (layer(in_channels, width, 1), layer(width, width, 1), layer(width, width, 1))
    heads = tuple(layer(width, num_classes, d) for d in dilations)
    return NetworkParams(trunk, heads)


def _im2col(x: np.ndarray, size: int, dilation: int) -> np.ndarray:
    h, w, c = x.shape
    pad = (size - 1) // 2 * dilation
    padded = np.pad(x, ((pad, pad), (pad, pad), (0, 0)))
    taps = [padded[dy * dilation:dy * dilation + h, dx * dilation:dx * dilation + w]
            for dy in range(size) for dx in range(size)]
    return np.stack(taps, axis=2).reshape(h * w, size * size * c)


def _col2im(cols: np.ndarray, shape, size: int, dilation: int) -> np.ndarray:
    h, w, c = shape
    pad = (size - 1) // 2 * dilation
    out = np.zeros((h + 2 * pad, w + 2 * pad, c), dtype=cols.dtype)
    cols = cols.reshape(h, w, size * size, c)
    for tap in range(size * size):
        dy, dx = divmod(tap, size)
        out[dy * dilation:dy * dilation + h, dx * dilation:dx * dilation + w] += cols[:, :, tap]
    return out[pad:pad + h, pad:pad + w]


def dilated_conv2d(x, layer: ConvLayer) -> np.ndarray:
    """Same-size zero-padded convolution whose taps are ``dilation`` pixels apart.

    ``out[y, x, o] = bias[o] + sum(in[y + dy*d, x + dx*d, i] * kernel[dy + r, dx + r, i, o])``
    with ``dy, dx`` in ``[-r, r]`` and out-of-range taps reading zero.
    """
    x = as_float_grid(x, "input")
    if x.shape[2] != layer.in_channels:
        raise InvalidInput(f"input has {x.shape[2]} channels, layer expects {layer.in_channels}")
    return _conv(x, layer)[0]


def _conv(x: np.ndarray, layer: ConvLayer):
    h, w, _ = x.shape
    cols = _im2col(x, layer.size, layer.dilation)
    out = cols @ layer.kernel.reshape(-1, layer.out_channels) + layer.bias
    return out.reshape(h, w, layer.out_channels), cols


def _conv_backward(grad_out: np.ndarray, cols: np.ndarray, layer: ConvLayer, in_shape, need_input: bool = True):
    g = grad_out.reshape(-1, layer.out_channels)
    grad_layer = ConvLayer((cols.T @ g).reshape(layer.kernel.shape), g.sum(axis=0), layer.dilation)
    if not need_input:
        return grad_layer, None
    grad_cols = g @ layer.kernel.reshape(-1, layer.out_channels).T
    return grad_layer, _col2im(grad_cols, in_shape, layer.size, layer.dilation)


@dataclass
class ForwardCache:
    params: NetworkParams
    input_shape: tuple
    trunk_cols: list = field(default_factory=list)
    trunk_pre: list = field(default_factory=list)
    head_cols: list = field(default_factory=list)
    features: np.ndarray | None = None


def forward(params: NetworkParams, image) -> tuple[np.ndarray, ForwardCache]:
    """Logits ``(H, W, classes)`` for a single-channel image, plus backward cache."""
    x = as_float_grid(image, "image")
    if x.shape[2] != params.trunk[0].in_channels:
        raise InvalidInput(f"image has {x.shape[2]} channels, network expects {params.trunk[0].in_channels}")
    cache = ForwardCache(params=params, input_shape=x.shape)
    for layer in params.trunk:
        pre, cols = _conv(x, layer)
        cache.trunk_cols.append(cols)
        cache.trunk_pre.append(pre)
        x = np.maximum(pre, 0.0)
    cache.features = x

    logits = None
    for layer in params.heads:
        out, cols = _conv(x, layer)
        cache.head_cols.append(cols)
        logits = out if logits is None else logits + out
    return logits, cache


def backward(params: NetworkParams, cache: ForwardCache, grad_logits) -> NetworkParams:
    """Gradients of a scalar loss w.r.t. every kernel and bias, given dLoss/dLogits."""
    if cache.params is not params or cache.features is None:
        raise InvalidState("forward cache was produced by different parameters")
    g = np.asarray(grad_logits, dtype=np.float64)
    if g.shape != cache.features.shape[:2] + (params.out_channels,):
        raise InvalidState(f"grad_logits shape {g.shape} does not match the cached forward pass")

    # summation fusion: each head receives grad_logits unchanged
    head_grads, grad_feat = [], None
    for layer, cols in zip(params.heads, cache.head_cols):
        gl, gx = _conv_backward(g, cols, layer, cache.features.shape)
        head_grads.append(gl)
        grad_feat = gx if grad_feat is None else grad_feat + gx

    trunk_grads = [None] * len(params.trunk)
    grad = grad_feat
    for i in reversed(range(len(params.trunk))):
        layer, pre = params.trunk[i], cache.trunk_pre[i]
        grad = grad * (pre > 0.0)
        in_shape = cache.input_shape if i == 0 else cache.trunk_pre[i - 1].shape
        trunk_grads[i], grad = _conv_backward(grad, cache.trunk_cols[i], layer, in_shape, need_input=i > 0)
    return NetworkParams(tuple(trunk_grads), tuple(head_grads))


@dataclass(frozen=True)
class TrainConfig:
    learning_rate: float = 0.05
    epochs: int = 10
    batch: int = 1
    seed: int = 0
    weight_init_scale: float = 0.1

    def __post_init__(self):
        if self.learning_rate < 0 or self.epochs < 1 or self.batch < 1 or self.weight_init_scale <= 0:
            raise InvalidInput(f"invalid training configuration {self}")


def loss_and_grads(params: NetworkParams, image, labels):
    logits, cache = forward(params, image)
    out = weighted_softmax_loss(logits, labels)
    return out.loss, backward(params, cache, out.grad)


def _add(a: NetworkParams, b: NetworkParams) -> NetworkParams:
    def add(pair):
        x, y = pair
        return replace(x, kernel=x.kernel + y.kernel, bias=x.bias + y.bias)

    return NetworkParams(tuple(map(add, zip(a.trunk, b.trunk))), tuple(map(add, zip(a.heads, b.heads))))


def train(dataset, config: TrainConfig, params: NetworkParams | None = None):
    """Plain SGD on the weighted loss.

    Returns the final parameters and a list of per-epoch mean losses. Images
    are visited in a seeded random order each epoch; a step sums the
    gradients of ``config.batch`` images.
    """
    dataset = list(dataset)
    if not dataset:
        raise InvalidInput("cannot train on an empty dataset")
    sizes = {(np.shape(img)[:2], lab.shape) for img, lab in dataset}
    if any(a != b for a, b in sizes):
        raise InvalidInput("image and label sizes disagree")

    rng = np.random.default_rng(config.seed)
    if params is None:
        params = build_params(rng, config.weight_init_scale, in_channels=np.shape(dataset[0][0])[2])
    history = []
    for epoch in range(config.epochs):
        order = rng.permutation(len(dataset))
        total = 0.0
        for start in range(0, len(order), config.batch):
            acc = None
            for idx in order[start:start + config.batch]:
                image, labels = dataset[idx]
                loss, grads = loss_and_grads(params, image, labels)
                total += loss
                acc = grads if acc is None else _add(acc, grads)
            params = params.sgd_step(acc, config.learning_rate)
        history.append(total / len(dataset))
        log.info("epoch %d mean loss %.6f", epoch + 1, history[-1])
    return params, history


def format_loss_log(history) -> str:
    lines = ["epoch,mean_loss"] + [f"{i + 1},{loss:.10g}" for i, loss in enumerate(history)]
    return "\n".join(lines) + "\n"


# -- checkpoints -------------------------------------------------------------
# weights.ften holds, per layer in trunk0..trunk2, head_d1, head_d2, head_d4
# order, the kernel tensor (k, k, c_in, c_out) followed by the bias (c_out,).
# manifest.json records names, shapes and dilations in the same order.

WEIGHTS_FILE = "weights.ften"
MANIFEST_FILE = "manifest.json"


def save_checkpoint(directory, params: NetworkParams, config: TrainConfig | None = None, extra=None) -> None:
    directory = Path(directory)
    directory.mkdir(parents=True, exist_ok=True)
    blobs, layers = [], []
    for name, layer in params.layers():
        blobs += [encode_ften(layer.kernel), encode_ften(layer.bias)]
        layers.append({"name": name, "kernel_shape": list(layer.kernel.shape),
                       "bias_shape": list(layer.bias.shape), "dilation": layer.dilation,
                       "role": "trunk" if name.startswith("trunk") else "head"})
    manifest = {"format": "wordfence-toynet", "layers": layers}
    if config is not None:
        manifest["config"] = {"learning_rate": config.learning_rate, "epochs": config.epochs,
                              "batch": config.batch, "seed": config.seed,
                              "weight_init_scale": config.weight_init_scale}
        manifest["seed"] = config.seed
    if extra:
        manifest.update(extra)
    (directory / WEIGHTS_FILE).write_bytes(b"".join(blobs))
    (directory / MANIFEST_FILE).write_text(json.dumps(manifest, indent=1, sort_keys=True) + "\n")


def load_checkpoint(directory) -> tuple[NetworkParams, dict]:
    directory = Path(directory)
    weights_path, manifest_path = directory / WEIGHTS_FILE, directory / MANIFEST_FILE
    try:
        manifest = json.loads(manifest_path.read_text())
        buf = weights_path.read_bytes()
    except OSError as exc:
        raise FormatError(f"{exc.filename}: cannot read checkpoint ({exc.strerror})") from exc
    except json.JSONDecodeError as exc:
        raise FormatError(f"{manifest_path}: invalid JSON ({exc.msg})") from exc

    trunk, heads, offset = [], [], 0
    try:
        for entry in manifest["layers"]:
            kernel, offset = decode_ften(buf, offset, str(weights_path))
            bias, offset = decode_ften(buf, offset, str(weights_path))
            if list(kernel.shape) != entry["kernel_shape"] or list(bias.shape) != entry["bias_shape"]:
                raise FormatError(f"{weights_path}: tensor shapes disagree with {manifest_path}")
            layer = ConvLayer(kernel.astype(np.float64), bias.astype(np.float64), int(entry["dilation"]))
            (trunk if entry["role"] == "trunk" else heads).append(layer)
    except (KeyError, TypeError, InvalidInput) as exc:
        raise FormatError(f"{manifest_path}: malformed manifest ({exc})") from exc
    if offset != len(buf):
        raise FormatError(f"{weights_path}: trailing bytes after the last tensor")
    if not trunk or not heads:
        raise FormatError(f"{manifest_path}: checkpoint lists no layers")
    return NetworkParams(tuple(trunk), tuple(heads)), manifest
