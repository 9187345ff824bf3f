"""Per-view autoencoders with contrastive and clustering heads."""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Sequence

import numpy as np

from .diffcore import DEFAULT_DTYPE, DimensionError, Tensor, linear, relu, softmax_rows


class ConfigError(ValueError):
    """Invalid model or training configuration."""


@dataclass(frozen=True)
class ViewSpec:
    input_dim: int
    hidden: tuple[int, ...] = (128,)
    embed_dim: int = 32

    def __post_init__(self):
        object.__setattr__(self, "hidden", tuple(int(h) for h in self.hidden))
        if self.input_dim < 1 or self.embed_dim < 1 or any(h < 1 for h in self.hidden):
            raise ConfigError(f"layer sizes must be positive: {self}")

    @property
    def encoder_sizes(self) -> list[int]:
        return [self.input_dim, *self.hidden, self.embed_dim]

    @property
    def decoder_sizes(self) -> list[int]:
        return self.encoder_sizes[::-1]


@dataclass
class Layer:
    W: Tensor
    b: Tensor


@dataclass
class ModelState:
    specs: list[ViewSpec]
    contrast_dim: int
    n_clusters: int
    encoders: list[list[Layer]]
    decoders: list[list[Layer]]
    contrast_heads: list[Layer]
    cluster_heads: list[Layer]

    @property
    def n_views(self) -> int:
        return len(self.specs)

    @property
    def embed_dim(self) -> int:
        return self.specs[0].embed_dim

    @property
    def dtype(self):
        return self.contrast_heads[0].W.dtype

    def named_parameters(self) -> list[tuple[str, Tensor]]:
        out = []
        for v in range(self.n_views):
            for role, layers in (("enc", self.encoders[v]), ("dec", self.decoders[v])):
                for i, layer in enumerate(layers):
                    out.append((f"view{v}.{role}{i}.W", layer.W))
                    out.append((f"view{v}.{role}{i}.b", layer.b))
            for role, layer in (("contrast", self.contrast_heads[v]), ("cluster", self.cluster_heads[v])):
                out.append((f"view{v}.{role}.W", layer.W))
                out.append((f"view{v}.{role}.b", layer.b))
        return out

    def parameters(self) -> list[Tensor]:
        return [p for _, p in self.named_parameters()]

    def autoencoder_parameters(self) -> list[Tensor]:
        return [p for name, p in self.named_parameters() if ".enc" in name or ".dec" in name]

    def head_parameters(self) -> list[Tensor]:
        return [p for name, p in self.named_parameters() if ".contrast" in name or ".cluster" in name]

    # forward pieces; inputs may be arrays or tensors

    def encode(self, v: int, x) -> Tensor:
        layers = self.encoders[v]
        h = x
        for i, layer in enumerate(layers):
            h = linear(h, layer.W, layer.b)
            if i < len(layers) - 1:
                h = relu(h)
        return h

    def decode(self, v: int, z) -> Tensor:
        layers = self.decoders[v]
        h = z
        for i, layer in enumerate(layers):
            h = linear(h, layer.W, layer.b)
            if i < len(layers) - 1:
                h = relu(h)
        return h

    def contrast(self, v: int, z) -> Tensor:
        head = self.contrast_heads[v]
        return linear(z, head.W, head.b)

    def assign(self, v: int, z) -> Tensor:
        head = self.cluster_heads[v]
        return softmax_rows(linear(z, head.W, head.b))


@dataclass
class ForwardBundle:
    z: list[Tensor]
    x_hat: list[Tensor]
    h: list[Tensor]
    p: list[Tensor]
    p_neighbor: list[Tensor] = field(default_factory=list)


def _kaiming_layer(rng: np.random.Generator, fan_in: int, fan_out: int, dtype) -> Layer:
    bound = np.sqrt(6.0 / fan_in)
    W = rng.uniform(-bound, bound, size=(fan_in, fan_out)).astype(dtype)
    return Layer(Tensor(W, requires_grad=True), Tensor(np.zeros(fan_out, dtype=dtype), requires_grad=True))


def _stack(rng, sizes: Sequence[int], dtype) -> list[Layer]:
    return [_kaiming_layer(rng, a, b, dtype) for a, b in zip(sizes[:-1], sizes[1:])]


def init_model(specs: Sequence[ViewSpec], contrast_dim: int, n_clusters: int, seed: int, dtype=DEFAULT_DTYPE) -> ModelState:
    """Build V autoencoders and their heads with fan-in scaled uniform weights.

    Each view draws from its own generator keyed on ``(seed, view)``, so a
    view's weights do not depend on how many other views exist.
    """
    specs = list(specs)
    if len(specs) < 2:
        raise ConfigError("at least two views are required")
    if n_clusters < 2:
        raise ConfigError("n_clusters must be >= 2")
    if contrast_dim < 1:
        raise ConfigError("contrast_dim must be >= 1")
    m = specs[0].embed_dim
    if any(s.embed_dim != m for s in specs):
        raise ConfigError("all views must share the embedding dimension")
    if contrast_dim >= m:
        raise ConfigError(f"contrast_dim ({contrast_dim}) must be smaller than embed_dim ({m})")

    encoders, decoders, contrast_heads, cluster_heads = [], [], [], []
    for v, spec in enumerate(specs):
        rng = np.random.default_rng([seed, v])
        encoders.append(_stack(rng, spec.encoder_sizes, dtype))
        decoders.append(_stack(rng, spec.decoder_sizes, dtype))
        contrast_heads.append(_kaiming_layer(rng, m, contrast_dim, dtype))
        cluster_heads.append(_kaiming_layer(rng, m, n_clusters, dtype))
    return ModelState(specs, contrast_dim, n_clusters, encoders, decoders, contrast_heads, cluster_heads)


def check_views(model: ModelState, views: Sequence) -> None:
    if len(views) != model.n_views:
        raise DimensionError(f"model has {model.n_views} views, got {len(views)}")
    for v, (x, spec) in enumerate(zip(views, model.specs)):
        shape = np.shape(x.data if isinstance(x, Tensor) else x)
        if len(shape) != 2 or shape[1] != spec.input_dim:
            raise DimensionError(f"view {v}: expected (*, {spec.input_dim}), got {shape}")


def forward_views(model: ModelState, views: Sequence, sigma: float, seed) -> ForwardBundle:
    """Run every view through its autoencoder and heads.

    Neighbor assignments come from the clustering head applied to the
    embedding plus ``sigma`` times standard normal noise; view v draws its
    noise from ``default_rng([*seed, v])``.
    """
    from .losses import sample_neighbors

    check_views(model, views)
    seed = list(np.atleast_1d(seed).astype(int))
    bundle = ForwardBundle([], [], [], [], [])
    for v, x in enumerate(views):
        z = model.encode(v, x)
        bundle.z.append(z)
        bundle.x_hat.append(model.decode(v, z))
        bundle.h.append(model.contrast(v, z))
        bundle.p.append(model.assign(v, z))
        if sigma == 0:
            bundle.p_neighbor.append(bundle.p[-1])
        else:
            bundle.p_neighbor.append(model.assign(v, sample_neighbors(z, sigma, [*seed, v])))
    return bundle
