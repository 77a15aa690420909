"""Full forward pipeline: camera -> (color image, albedo image) in the log domain.

Ground-truth images are encoded as ln(x + eps) before any loss is computed;
decoders emit log-domain values directly, and decoding clamps back to [0, 1].
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np
import torch

from .attention import AttentionModel, FeatureMaps, ScenePoints, render_feature_maps
from .camera import Camera
from .nets import UNet, UNetSpec

LOG_EPS = 1e-3
_RANGE_SLACK = 1e-6


class RenderError(ValueError):
    pass


def log_encode(x, eps: float = LOG_EPS):
    """ln(x + eps) for linear intensities in [0, 1]. numpy or torch."""
    if torch.is_tensor(x):
        lo, hi = x.min().item(), x.max().item()
    else:
        x = np.asarray(x)
        lo, hi = float(x.min()), float(x.max())
    if lo < -_RANGE_SLACK or hi > 1.0 + _RANGE_SLACK:
        raise RenderError(f"log_encode input outside [0, 1]: range [{lo}, {hi}]")
    return torch.log(x + eps) if torch.is_tensor(x) else np.log(x + eps)


def log_decode(y, eps: float = LOG_EPS):
    """Inverse of log_encode, clamped to [0, 1]."""
    if torch.is_tensor(y):
        return torch.clamp(torch.exp(y) - eps, 0.0, 1.0)
    return np.clip(np.exp(np.asarray(y)) - eps, 0.0, 1.0)


@dataclass(frozen=True)
class DecoderConfig:
    albedo_in: int = 16
    shading_in: int = 16
    depth: int = 3
    base_width: int = 32


class DecoderPair(torch.nn.Module):
    """Albedo decoder consumes only the albedo feature map; the color decoder
    consumes albedo and shading maps concatenated along channels. Keeping the
    albedo path blind to shading features is what makes shading edits provably
    leave the albedo image untouched."""

    def __init__(self, config: DecoderConfig):
        super().__init__()
        self.config = config
        self.albedo = UNet(UNetSpec(config.albedo_in, 3, config.depth, config.base_width))
        self.color = UNet(UNetSpec(config.albedo_in + config.shading_in, 3,
                                   config.depth, config.base_width))

    @staticmethod
    def create(config: DecoderConfig, seed: int) -> "DecoderPair":
        pair = DecoderPair(config)
        pair.albedo = UNet.create(pair.albedo.spec, seed)
        pair.color = UNet.create(pair.color.spec, seed + 1)
        return pair


@dataclass(frozen=True)
class RenderOutput:
    color_log: torch.Tensor   # (H, W, 3)
    albedo_log: torch.Tensor  # (H, W, 3)
    feature_maps: FeatureMaps | None = None

    def color_linear(self) -> np.ndarray:
        return log_decode(self.color_log.detach()).cpu().numpy()

    def albedo_linear(self) -> np.ndarray:
        return log_decode(self.albedo_log.detach()).cpu().numpy()


def decode_maps(decoders: DecoderPair, maps: FeatureMaps) -> tuple[torch.Tensor, torch.Tensor]:
    """Run both U-Nets over (H, W, C) feature maps; returns log-domain images."""
    albedo_in = maps.albedo.permute(2, 0, 1).unsqueeze(0)
    joint_in = torch.cat([maps.albedo, maps.shading], dim=-1).permute(2, 0, 1).unsqueeze(0)
    albedo_img = decoders.albedo(albedo_in)[0].permute(1, 2, 0)
    color_img = decoders.color(joint_in)[0].permute(1, 2, 0)
    return color_img, albedo_img


def render_view(
    points: ScenePoints,
    attn: AttentionModel,
    decoders: DecoderPair,
    camera: Camera,
    indices: torch.Tensor | None = None,
    chunk: int = 1024,
    keep_maps: bool = False,
) -> RenderOutput:
    """Render log-domain color and albedo images for one camera."""
    h, w = camera.resolution
    div = 2 ** decoders.config.depth
    if h % div or w % div:
        raise RenderError(
            f"resolution {h}x{w} not divisible by 2**depth = {div}; "
            f"pad to {math.ceil(h / div) * div}x{math.ceil(w / div) * div}")
    maps = render_feature_maps(points, attn, camera, indices=indices, chunk=chunk)
    color_img, albedo_img = decode_maps(decoders, maps)
    return RenderOutput(
        color_log=color_img,
        albedo_log=albedo_img,
        feature_maps=maps if keep_maps else None,
    )
