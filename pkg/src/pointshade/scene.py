"""Point-cloud scene representation: positions, albedo/shading features, influence."""

from __future__ import annotations

from dataclasses import dataclass, replace

import numpy as np

ALBEDO_FEATURE_DIM = 32
SHADING_FEATURE_DIM = 32
FEATURE_INIT_STD = 0.1


class SceneError(ValueError):
    pass


@dataclass(frozen=True)
class Bounds:
    """Axis-aligned box in scene units."""

    lo: np.ndarray
    hi: np.ndarray

    def __post_init__(self):
        lo = np.asarray(self.lo, dtype=np.float64)
        hi = np.asarray(self.hi, dtype=np.float64)
        if lo.shape != (3,) or hi.shape != (3,):
            raise SceneError("bounds must be 3-vectors")
        if not np.all(hi > lo):
            raise SceneError(f"degenerate bounds: lo={lo}, hi={hi}")
        lo.setflags(write=False)
        hi.setflags(write=False)
        object.__setattr__(self, "lo", lo)
        object.__setattr__(self, "hi", hi)

    def contains(self, points: np.ndarray) -> np.ndarray:
        p = np.asarray(points)
        return np.all((p >= self.lo) & (p <= self.hi), axis=-1)

    def to_json(self) -> dict:
        return {"min": self.lo.tolist(), "max": self.hi.tolist()}

    @staticmethod
    def from_json(d: dict) -> "Bounds":
        return Bounds(np.asarray(d["min"]), np.asarray(d["max"]))


def _frozen(a: np.ndarray, dtype) -> np.ndarray:
    out = np.ascontiguousarray(a, dtype=dtype)
    out.setflags(write=False)
    return out


@dataclass(frozen=True)
class PointScene:
    """N points with positions, per-point albedo/shading feature vectors, and a
    scalar influence score biasing the attention logits.

    Immutable: edits return a new scene with a strictly larger version_id.
    """

    positions: np.ndarray         # (N, 3) float32
    albedo_features: np.ndarray   # (N, n) float32
    shading_features: np.ndarray  # (N, m) float32
    influence: np.ndarray         # (N,)  float32
    bounds: Bounds
    version_id: int = 0

    def __post_init__(self):
        pos = _frozen(self.positions, np.float32)
        alb = _frozen(self.albedo_features, np.float32)
        sha = _frozen(self.shading_features, np.float32)
        inf = _frozen(self.influence, np.float32)
        n = pos.shape[0]
        if pos.ndim != 2 or pos.shape[1] != 3:
            raise SceneError(f"positions must be (N, 3), got {pos.shape}")
        if alb.ndim != 2 or alb.shape[0] != n:
            raise SceneError(f"albedo features must be (N, n), got {alb.shape}")
        if sha.ndim != 2 or sha.shape[0] != n:
            raise SceneError(f"shading features must be (N, m), got {sha.shape}")
        if inf.shape != (n,):
            raise SceneError(f"influence must be (N,), got {inf.shape}")
        for name, arr in (("positions", pos), ("albedo_features", alb),
                          ("shading_features", sha), ("influence", inf)):
            if not np.all(np.isfinite(arr)):
                raise SceneError(f"non-finite values in {name}")
        object.__setattr__(self, "positions", pos)
        object.__setattr__(self, "albedo_features", alb)
        object.__setattr__(self, "shading_features", sha)
        object.__setattr__(self, "influence", inf)

    @property
    def num_points(self) -> int:
        return self.positions.shape[0]

    @property
    def albedo_dim(self) -> int:
        return self.albedo_features.shape[1]

    @property
    def shading_dim(self) -> int:
        return self.shading_features.shape[1]

    def evolved(self, **arrays) -> "PointScene":
        """New scene version with some arrays replaced; bumps version_id."""
        return replace(self, version_id=self.version_id + 1, **arrays)


def init_scene(
    num_points: int,
    bounds: Bounds,
    seed: int,
    albedo_dim: int = ALBEDO_FEATURE_DIM,
    shading_dim: int = SHADING_FEATURE_DIM,
    feature_std: float = FEATURE_INIT_STD,
) -> PointScene:
    """Random scene: positions uniform in bounds, features ~ N(0, feature_std^2),
    influence zero. Bit-reproducible for a given seed."""
    if num_points < 1:
        raise SceneError(f"num_points must be >= 1, got {num_points}")
    rng = np.random.default_rng(seed)
    span = bounds.hi - bounds.lo
    positions = bounds.lo + rng.random((num_points, 3)) * span
    albedo = rng.normal(0.0, feature_std, size=(num_points, albedo_dim))
    shading = rng.normal(0.0, feature_std, size=(num_points, shading_dim))
    influence = np.zeros(num_points)
    return PointScene(
        positions=positions,
        albedo_features=albedo,
        shading_features=shading,
        influence=influence,
        bounds=bounds,
        version_id=0,
    )
