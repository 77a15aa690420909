"""Small MLPs and a compact U-Net, the only network shapes the pipeline needs.

All parameters are He fan-in initialized with an explicit torch.Generator so
model construction is bit-reproducible from a seed. Training runs in float32;
gradient-check suites convert modules to float64.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import torch
import torch.nn as nn
import torch.nn.functional as F


class NetError(ValueError):
    pass


ACTIVATIONS = {"relu", "leaky_relu"}


@dataclass(frozen=True)
class MlpSpec:
    widths: tuple[int, ...]          # input -> hidden... -> output
    activation: str = "leaky_relu"   # hidden activation; final layer is identity
    slope: float = 0.2

    def __post_init__(self):
        if len(self.widths) < 3:
            raise NetError("MLP needs at least one hidden layer")
        if any(w < 1 for w in self.widths):
            raise NetError(f"widths must be >= 1, got {self.widths}")
        if self.activation not in ACTIVATIONS:
            raise NetError(f"unknown activation {self.activation!r}")


@dataclass(frozen=True)
class UNetSpec:
    in_channels: int
    out_channels: int = 3
    depth: int = 3
    base_width: int = 32
    slope: float = 0.2


def _he_init_(weight: torch.Tensor, bias: torch.Tensor | None, slope: float,
              generator: torch.Generator) -> None:
    fan_in = weight.shape[1] * (weight[0, 0].numel() if weight.dim() > 2 else 1)
    gain = math.sqrt(2.0 / (1.0 + slope * slope))
    std = gain / math.sqrt(fan_in)
    with torch.no_grad():
        weight.normal_(0.0, std, generator=generator)
        if bias is not None:
            bias.zero_()


class Mlp(nn.Module):
    """Linear stack with LeakyReLU/ReLU hidden activations and identity output."""

    def __init__(self, spec: MlpSpec):
        super().__init__()
        self.spec = spec
        self.layers = nn.ModuleList(
            nn.Linear(a, b) for a, b in zip(spec.widths[:-1], spec.widths[1:])
        )

    @staticmethod
    def create(spec: MlpSpec, seed: int) -> "Mlp":
        m = Mlp(spec)
        g = torch.Generator().manual_seed(seed)
        for layer in m.layers:
            _he_init_(layer.weight, layer.bias, spec.slope, g)
        return m

    def forward(self, x: torch.Tensor) -> torch.Tensor:
        if x.shape[-1] != self.spec.widths[0]:
            raise NetError(
                f"MLP expects input width {self.spec.widths[0]}, got {x.shape[-1]}")
        for i, layer in enumerate(self.layers):
            x = layer(x)
            if i < len(self.layers) - 1:
                if self.spec.activation == "relu":
                    x = F.relu(x)
                else:
                    x = F.leaky_relu(x, self.spec.slope)
        return x


class _DoubleConv(nn.Module):
    def __init__(self, c_in: int, c_out: int, slope: float):
        super().__init__()
        self.slope = slope
        self.conv1 = nn.Conv2d(c_in, c_out, 3, padding=1)
        self.conv2 = nn.Conv2d(c_out, c_out, 3, padding=1)

    def forward(self, x):
        x = F.leaky_relu(self.conv1(x), self.slope)
        return F.leaky_relu(self.conv2(x), self.slope)


class UNet(nn.Module):
    """Encoder/decoder with concatenation skips, average-pool downsampling,
    bilinear upsampling, and a final 1x1 projection. No final activation."""

    def __init__(self, spec: UNetSpec):
        super().__init__()
        self.spec = spec
        chs = [spec.base_width * 2 ** i for i in range(spec.depth + 1)]
        self.encoders = nn.ModuleList(
            _DoubleConv(spec.in_channels if i == 0 else chs[i - 1], chs[i], spec.slope)
            for i in range(spec.depth)
        )
        self.bottleneck = _DoubleConv(chs[spec.depth - 1], chs[spec.depth], spec.slope)
        self.decoders = nn.ModuleList(
            _DoubleConv(chs[i + 1] + chs[i], chs[i], spec.slope)
            for i in reversed(range(spec.depth))
        )
        self.out_proj = nn.Conv2d(spec.base_width, spec.out_channels, 1)

    @staticmethod
    def create(spec: UNetSpec, seed: int) -> "UNet":
        u = UNet(spec)
        g = torch.Generator().manual_seed(seed)
        for mod in u.modules():
            if isinstance(mod, nn.Conv2d):
                _he_init_(mod.weight, mod.bias, spec.slope, g)
        return u

    def forward(self, x: torch.Tensor) -> torch.Tensor:
        """x: (B, C_in, H, W) with H and W divisible by 2**depth."""
        h, w = x.shape[-2], x.shape[-1]
        div = 2 ** self.spec.depth
        if h % div or w % div:
            raise NetError(
                f"U-Net of depth {self.spec.depth} needs H, W divisible by {div}; "
                f"got {h}x{w} (pad to {math.ceil(h / div) * div}x{math.ceil(w / div) * div})")
        skips = []
        for enc in self.encoders:
            x = enc(x)
            skips.append(x)
            x = F.avg_pool2d(x, 2)
        x = self.bottleneck(x)
        for dec, skip in zip(self.decoders, reversed(skips)):
            x = F.interpolate(x, scale_factor=2.0, mode="bilinear", align_corners=False)
            x = dec(torch.cat([x, skip], dim=1))
        return self.out_proj(x)


def state_to_numpy(module: nn.Module) -> dict:
    """Module state_dict as name -> numpy array (detached copies)."""
    return {k: v.detach().cpu().numpy().copy() for k, v in module.state_dict().items()}


def load_numpy_state(module: nn.Module, state: dict) -> None:
    tensors = {k: torch.from_numpy(v.copy()) for k, v in state.items()}
    module.load_state_dict(tensors)
