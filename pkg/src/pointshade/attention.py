"""Ray-point attention: geometric embeddings, nearest-point selection, softmax
weighting, and assembly of per-pixel albedo/shading feature maps.

Selection ranks points by perpendicular distance to the ray (squared distance
internally; the ordering is identical) with ties broken by ascending point
index. Selection itself carries no gradient; gradients flow through the
geometry and features of the selected points.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
import torch

from .camera import Camera, Ray, generate_rays
from .nets import Mlp, MlpSpec, load_numpy_state, state_to_numpy
from .scene import PointScene

GEOM_EMBED_DIM = 10  # point-to-origin (3) + perp displacement (3) + distance (1) + ray dir (3)


class AttentionError(ValueError):
    pass


@dataclass(frozen=True)
class AttentionConfig:
    neighborhood: int = 8       # K points per ray
    key_dim: int = 32
    albedo_value_dim: int = 16
    shading_value_dim: int = 16
    hidden: int = 64


@dataclass(frozen=True)
class ScenePoints:
    """Torch view of a scene's learnable point attributes."""

    positions: torch.Tensor         # (N, 3)
    albedo_features: torch.Tensor   # (N, n)
    shading_features: torch.Tensor  # (N, m)
    influence: torch.Tensor         # (N,)

    @staticmethod
    def from_scene(scene: PointScene, dtype=torch.float32,
                   requires_grad: bool = False) -> "ScenePoints":
        def conv(a):
            t = torch.from_numpy(a.copy()).to(dtype)
            t.requires_grad_(requires_grad)
            return t
        return ScenePoints(
            positions=conv(scene.positions),
            albedo_features=conv(scene.albedo_features),
            shading_features=conv(scene.shading_features),
            influence=conv(scene.influence),
        )

    @property
    def num_points(self) -> int:
        return self.positions.shape[0]


class AttentionModel(torch.nn.Module):
    """Four embedding MLPs: key and query (shared key width), plus one value
    MLP per feature family, each consuming the feature with the ray geometry."""

    def __init__(self, config: AttentionConfig, albedo_dim: int, shading_dim: int,
                 hidden: int | None = None):
        super().__init__()
        h = hidden or config.hidden
        self.config = config
        self.albedo_dim = albedo_dim
        self.shading_dim = shading_dim
        self.f_key = Mlp(MlpSpec((GEOM_EMBED_DIM, h, h, config.key_dim)))
        self.f_query = Mlp(MlpSpec((3, h, h, config.key_dim)))
        self.f_value_albedo = Mlp(
            MlpSpec((albedo_dim + GEOM_EMBED_DIM, h, h, config.albedo_value_dim)))
        self.f_value_shading = Mlp(
            MlpSpec((shading_dim + GEOM_EMBED_DIM, h, h, config.shading_value_dim)))

    @staticmethod
    def create(config: AttentionConfig, albedo_dim: int, shading_dim: int,
               seed: int, hidden: int | None = None) -> "AttentionModel":
        model = AttentionModel(config, albedo_dim, shading_dim, hidden)
        g = torch.Generator().manual_seed(seed)
        from .nets import _he_init_
        for mlp in (model.f_key, model.f_query, model.f_value_albedo,
                    model.f_value_shading):
            for layer in mlp.layers:
                _he_init_(layer.weight, layer.bias, mlp.spec.slope, g)
        return model


def geometric_embedding(positions: torch.Tensor, origin: torch.Tensor,
                        directions: torch.Tensor) -> torch.Tensor:
    """Ray-dependent embedding for each (point, ray) pair.

    positions: (..., 3), origin: (3,) or broadcastable, directions: (..., 3)
    unit vectors broadcastable against positions. Returns (..., 10):
    [p - o, displacement from point to its closest approach on the ray,
    perpendicular distance, ray direction].
    """
    to_point = positions - origin
    along = (to_point * directions).sum(-1, keepdim=True)
    perp = along * directions - to_point  # closest point on ray minus p
    dist = torch.linalg.vector_norm(perp, dim=-1, keepdim=True)
    dirs = torch.broadcast_to(directions, to_point.shape)
    return torch.cat([to_point, perp, dist, dirs], dim=-1)


def select_topk(positions, ray: Ray, k: int) -> np.ndarray:
    """Indices of the k points nearest the ray by perpendicular distance,
    ordered ascending with ties broken by ascending index."""
    p = np.asarray(positions, dtype=np.float64) if not torch.is_tensor(positions) \
        else positions.detach().cpu().numpy().astype(np.float64)
    n = p.shape[0]
    if n < k:
        raise AttentionError(f"need at least K={k} points, scene has {n}")
    v = p - ray.origin
    along = v @ ray.direction
    perp = v - along[:, None] * ray.direction
    d2 = (perp * perp).sum(-1)
    order = np.lexsort((np.arange(n), d2))
    return order[:k].astype(np.int64)


def select_topk_batch(positions: torch.Tensor, origin: torch.Tensor,
                      directions: torch.Tensor, k: int,
                      chunk: int = 1024) -> torch.Tensor:
    """Batched selection for all rays of one camera. directions: (R, 3) unit.
    Returns (R, k) int64 indices sorted by ascending perpendicular distance."""
    n = positions.shape[0]
    if n < k:
        raise AttentionError(f"need at least K={k} points, scene has {n}")
    with torch.inference_mode():
        v = positions - origin            # (N, 3)
        v2 = (v * v).sum(-1)              # (N,)
        out = []
        for i in range(0, directions.shape[0], chunk):
            d = directions[i:i + chunk]
            along = d @ v.T               # (r, N)
            d2 = v2.unsqueeze(0) - along * along
            out.append(torch.topk(d2, k, dim=-1, largest=False, sorted=True).indices)
    return torch.cat(out, dim=0).clone()


def attention_weights(queries: torch.Tensor, keys: torch.Tensor,
                      influence: torch.Tensor) -> torch.Tensor:
    """Softmax over scaled key/query dot products plus the influence bias.

    queries: (..., d_k), keys: (..., K, d_k), influence: (..., K).
    Returns nonnegative weights summing to 1 over the last axis.
    """
    d_k = keys.shape[-1]
    logits = (keys * queries.unsqueeze(-2)).sum(-1) / (d_k ** 0.5) + influence
    logits = logits - logits.max(dim=-1, keepdim=True).values
    w = torch.exp(logits)
    return w / w.sum(dim=-1, keepdim=True)


def attend_rays(
    points: ScenePoints,
    model: AttentionModel,
    origin: torch.Tensor,
    directions: torch.Tensor,
    indices: torch.Tensor | None = None,
    chunk: int = 1024,
):
    """Attention pass for a bundle of rays sharing one origin.

    directions: (R, 3) unit vectors. If `indices` is given it must be (R, K)
    and overrides nearest-point selection (used to hold selection fixed).
    Returns (indices (R, K), weights (R, K), albedo values (R, K, d_a),
    shading values (R, K, d_s)).
    """
    k = model.config.neighborhood
    if indices is None:
        indices = select_topk_batch(points.positions, origin, directions, k, chunk)
    p_sel = points.positions[indices]                      # (R, K, 3)
    geom = geometric_embedding(p_sel, origin, directions.unsqueeze(1))
    keys = model.f_key(geom)                               # (R, K, d_k)
    queries = model.f_query(directions)                    # (R, d_k)
    tau = points.influence[indices]                        # (R, K)
    weights = attention_weights(queries, keys, tau)
    albedo_in = torch.cat([points.albedo_features[indices], geom], dim=-1)
    shading_in = torch.cat([points.shading_features[indices], geom], dim=-1)
    v_albedo = model.f_value_albedo(albedo_in)
    v_shading = model.f_value_shading(shading_in)
    return indices, weights, v_albedo, v_shading


@dataclass(frozen=True)
class FeatureMaps:
    albedo: torch.Tensor   # (H, W, d_albedo)
    shading: torch.Tensor  # (H, W, d_shading)


def render_feature_maps(
    points: ScenePoints,
    model: AttentionModel,
    camera: Camera,
    indices: torch.Tensor | None = None,
    chunk: int = 1024,
) -> FeatureMaps:
    """Per-pixel albedo/shading feature maps for one camera."""
    h, w = camera.resolution
    origins, dirs = generate_rays(camera)
    dtype = points.positions.dtype
    origin_t = torch.from_numpy(origins[0, 0].copy()).to(dtype)
    dirs_t = torch.from_numpy(dirs.reshape(-1, 3).copy()).to(dtype)
    if indices is not None:
        indices = indices.reshape(-1, model.config.neighborhood)
    _, weights, v_albedo, v_shading = attend_rays(
        points, model, origin_t, dirs_t, indices=indices, chunk=chunk)
    albedo_map = (weights.unsqueeze(-1) * v_albedo).sum(dim=1)
    shading_map = (weights.unsqueeze(-1) * v_shading).sum(dim=1)
    da = model.config.albedo_value_dim
    ds = model.config.shading_value_dim
    return FeatureMaps(
        albedo=albedo_map.reshape(h, w, da),
        shading=shading_map.reshape(h, w, ds),
    )


def attention_state_to_numpy(model: AttentionModel) -> dict:
    return state_to_numpy(model)


def load_attention_state(model: AttentionModel, state: dict) -> None:
    load_numpy_state(model, state)
