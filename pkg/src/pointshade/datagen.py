"""Procedural multi-view scenes with exact ground-truth albedo/shading split.

First-hit ray tracing over spheres and axis-aligned boxes, Lambertian point
lights plus an ambient term, and per-primitive albedo textures. The generator
manufactures albedo A and shading S directly, so color = A * S holds to float
precision on every pixel. Background is black (A = S = 0 off-surface).
"""

from __future__ import annotations

import json
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from .camera import Camera, generate_rays, look_at_camera
from .dataio import ViewRecord, save_dataset
from .scene import Bounds


class DatagenError(ValueError):
    pass


# --------------------------------------------------------------------------
# Albedo textures

@dataclass(frozen=True)
class SolidColor:
    rgb: tuple[float, float, float]

    def sample(self, points: np.ndarray) -> np.ndarray:
        out = np.empty(points.shape[:-1] + (3,), dtype=np.float64)
        out[...] = self.rgb
        return out

    def to_json(self):
        return {"type": "solid", "rgb": list(self.rgb)}


@dataclass(frozen=True)
class Checkerboard:
    """3D checker: cell parity of floor(p / cell) summed over axes. Using the
    3D position keeps the pattern identical from every viewpoint."""

    color_a: tuple[float, float, float]
    color_b: tuple[float, float, float]
    cell: float = 0.5

    def sample(self, points: np.ndarray) -> np.ndarray:
        cells = np.floor(points / self.cell).astype(np.int64)
        parity = cells.sum(axis=-1) % 2
        a = np.asarray(self.color_a, dtype=np.float64)
        b = np.asarray(self.color_b, dtype=np.float64)
        return np.where(parity[..., None] == 0, a, b)

    def to_json(self):
        return {"type": "checker", "color_a": list(self.color_a),
                "color_b": list(self.color_b), "cell": self.cell}


@dataclass(frozen=True)
class ImageTexture:
    """Planar texture mapped over world x/y with the given scale (tiled)."""

    image: np.ndarray  # (h, w, 3) in [0, 1]
    scale: float = 1.0

    def sample(self, points: np.ndarray) -> np.ndarray:
        h, w = self.image.shape[:2]
        u = np.mod(points[..., 0] / self.scale, 1.0)
        v = np.mod(points[..., 1] / self.scale, 1.0)
        cols = np.clip((u * w).astype(np.int64), 0, w - 1)
        rows = np.clip((v * h).astype(np.int64), 0, h - 1)
        return self.image[rows, cols].astype(np.float64)

    def to_json(self):
        return {"type": "image", "shape": list(self.image.shape), "scale": self.scale}


def texture_from_json(d: dict):
    if d["type"] == "solid":
        return SolidColor(tuple(d["rgb"]))
    if d["type"] == "checker":
        return Checkerboard(tuple(d["color_a"]), tuple(d["color_b"]), d["cell"])
    raise DatagenError(f"cannot rebuild texture of type {d['type']!r}")


# --------------------------------------------------------------------------
# Primitives

@dataclass(frozen=True)
class Sphere:
    center: tuple[float, float, float]
    radius: float
    texture: object

    def intersect(self, origins: np.ndarray, dirs: np.ndarray) -> np.ndarray:
        """Smallest positive hit distance per ray, inf when missed."""
        oc = origins - np.asarray(self.center)
        b = (oc * dirs).sum(-1)
        c = (oc * oc).sum(-1) - self.radius ** 2
        disc = b * b - c
        hit = disc >= 0
        sq = np.sqrt(np.where(hit, disc, 0.0))
        t0 = -b - sq
        t1 = -b + sq
        t = np.where(t0 > 1e-9, t0, np.where(t1 > 1e-9, t1, np.inf))
        return np.where(hit, t, np.inf)

    def normal(self, points: np.ndarray) -> np.ndarray:
        n = points - np.asarray(self.center)
        return n / np.linalg.norm(n, axis=-1, keepdims=True)

    def to_json(self):
        return {"type": "sphere", "center": list(self.center),
                "radius": self.radius, "texture": self.texture.to_json()}


@dataclass(frozen=True)
class BoxPrim:
    lo: tuple[float, float, float]
    hi: tuple[float, float, float]
    texture: object

    def intersect(self, origins: np.ndarray, dirs: np.ndarray) -> np.ndarray:
        lo = np.asarray(self.lo)
        hi = np.asarray(self.hi)
        with np.errstate(divide="ignore", invalid="ignore"):
            inv = 1.0 / dirs
            t1 = (lo - origins) * inv
            t2 = (hi - origins) * inv
        tmin = np.minimum(t1, t2).max(axis=-1)
        tmax = np.maximum(t1, t2).min(axis=-1)
        hit = (tmax >= tmin) & (tmax > 1e-9)
        t = np.where(tmin > 1e-9, tmin, tmax)
        return np.where(hit, t, np.inf)

    def normal(self, points: np.ndarray) -> np.ndarray:
        lo = np.asarray(self.lo)
        hi = np.asarray(self.hi)
        # Face whose plane is closest to the hit point wins.
        d_lo = np.abs(points - lo)
        d_hi = np.abs(points - hi)
        dists = np.concatenate([d_lo, d_hi], axis=-1)  # (..., 6)
        face = np.argmin(dists, axis=-1)
        normals = np.zeros(points.shape[:-1] + (3,), dtype=np.float64)
        for f in range(6):
            axis, sign = f % 3, -1.0 if f < 3 else 1.0
            mask = face == f
            normals[mask, axis] = sign
        return normals

    def to_json(self):
        return {"type": "box", "lo": list(self.lo), "hi": list(self.hi),
                "texture": self.texture.to_json()}


def primitive_from_json(d: dict):
    tex = texture_from_json(d["texture"])
    if d["type"] == "sphere":
        return Sphere(tuple(d["center"]), d["radius"], tex)
    if d["type"] == "box":
        return BoxPrim(tuple(d["lo"]), tuple(d["hi"]), tex)
    raise DatagenError(f"unknown primitive type {d['type']!r}")


# --------------------------------------------------------------------------
# Lighting

@dataclass(frozen=True)
class PointLight:
    position: tuple[float, float, float]
    intensity: float  # monochromatic; all channels receive the same value

    def to_json(self):
        return {"position": list(self.position), "intensity": self.intensity}


def shade_lambertian(
    normals: np.ndarray,
    points: np.ndarray,
    lights: list[PointLight],
    ambient: float,
    occluder=None,
) -> np.ndarray:
    """Per-channel shading: clamp(ambient + sum_l I_l * max(0, n.w_l) / d_l^2, 0, 1).

    `occluder(points, light_pos)` may return a boolean shadow mask (True =
    blocked) to enable hard shadows.
    """
    s = np.full(points.shape[:-1], float(ambient), dtype=np.float64)
    for light in lights:
        to_light = np.asarray(light.position) - points
        d2 = (to_light * to_light).sum(-1)
        w = to_light / np.sqrt(d2)[..., None]
        lambert = np.maximum(0.0, (normals * w).sum(-1))
        term = light.intensity * lambert / d2
        if occluder is not None:
            term = np.where(occluder(points, np.asarray(light.position)), 0.0, term)
        s = s + term
    s = np.clip(s, 0.0, 1.0)
    return np.repeat(s[..., None], 3, axis=-1)


# --------------------------------------------------------------------------
# Scene spec and generation

@dataclass(frozen=True)
class CameraRing:
    count: int = 24
    radius: float = 3.4
    height: float = 1.9
    target: tuple[float, float, float] = (0.0, 0.0, 0.3)
    focal: float = 70.0

    def cameras(self, resolution: tuple[int, int]) -> list[Camera]:
        cams = []
        for i in range(self.count):
            a = 2.0 * np.pi * i / self.count
            eye = np.array([self.radius * np.cos(a), self.radius * np.sin(a),
                            self.height])
            cams.append(look_at_camera(eye, np.asarray(self.target), self.focal,
                                       resolution))
        return cams

    def to_json(self):
        return {"count": self.count, "radius": self.radius, "height": self.height,
                "target": list(self.target), "focal": self.focal}


@dataclass(frozen=True)
class SyntheticSceneSpec:
    primitives: tuple
    lights: tuple[PointLight, ...]
    ambient: float
    ring: CameraRing
    resolution: tuple[int, int] = (64, 64)
    bounds: Bounds = field(default_factory=lambda: Bounds(
        np.array([-2.2, -2.2, -0.3]), np.array([2.2, 2.2, 1.2])))
    shadows: bool = False
    seed: int = 0

    def __post_init__(self):
        if not self.primitives:
            raise DatagenError("scene needs at least one primitive")
        if not self.lights and self.ambient <= 0:
            raise DatagenError("scene needs at least one light or ambient > 0")

    def to_json(self):
        return {
            "primitives": [p.to_json() for p in self.primitives],
            "lights": [l.to_json() for l in self.lights],
            "ambient": self.ambient,
            "ring": self.ring.to_json(),
            "resolution": list(self.resolution),
            "bounds": self.bounds.to_json(),
            "shadows": self.shadows,
            "seed": self.seed,
        }

    @staticmethod
    def from_json(d: dict) -> "SyntheticSceneSpec":
        return SyntheticSceneSpec(
            primitives=tuple(primitive_from_json(p) for p in d["primitives"]),
            lights=tuple(PointLight(tuple(l["position"]), l["intensity"])
                         for l in d["lights"]),
            ambient=d["ambient"],
            ring=CameraRing(**{k: tuple(v) if k == "target" else v
                               for k, v in d["ring"].items()}),
            resolution=tuple(d["resolution"]),
            bounds=Bounds.from_json(d["bounds"]),
            shadows=d.get("shadows", False),
            seed=d.get("seed", 0),
        )


def trace_first_hit(spec: SyntheticSceneSpec, origins: np.ndarray,
                    dirs: np.ndarray):
    """First intersection along each ray.

    Returns (hit mask, hit points, normals, primitive index) with shapes
    broadcast over the ray grid; entries are undefined where hit is False.
    """
    ts = np.stack([p.intersect(origins, dirs) for p in spec.primitives], axis=0)
    prim_idx = np.argmin(ts, axis=0)
    t_hit = np.take_along_axis(ts, prim_idx[None], axis=0)[0]
    hit = np.isfinite(t_hit)
    t_safe = np.where(hit, t_hit, 0.0)
    points = origins + t_safe[..., None] * dirs
    normals = np.zeros_like(points)
    for k, prim in enumerate(spec.primitives):
        mask = hit & (prim_idx == k)
        if mask.any():
            normals[mask] = prim.normal(points[mask])
    return hit, points, normals, prim_idx


def _shadow_occluder(spec: SyntheticSceneSpec):
    def occluder(points: np.ndarray, light_pos: np.ndarray) -> np.ndarray:
        to_light = light_pos - points
        dist = np.linalg.norm(to_light, axis=-1)
        dirs = to_light / dist[..., None]
        # March from slightly off the surface to avoid self-intersection.
        starts = points + 1e-6 * dirs
        ts = np.stack([p.intersect(starts, dirs) for p in spec.primitives], axis=0)
        return ts.min(axis=0) < dist - 1e-6
    return occluder


def render_ground_truth(spec: SyntheticSceneSpec, camera: Camera) -> ViewRecord:
    """Ray-trace one view: albedo from textures, Lambertian shading, color = A*S."""
    origins, dirs = generate_rays(camera)
    hit, points, normals, prim_idx = trace_first_hit(spec, origins, dirs)
    albedo = np.zeros(origins.shape, dtype=np.float64)
    for k, prim in enumerate(spec.primitives):
        mask = hit & (prim_idx == k)
        if mask.any():
            albedo[mask] = prim.texture.sample(points[mask])
    occluder = _shadow_occluder(spec) if spec.shadows else None
    shading = np.zeros(origins.shape, dtype=np.float64)
    if hit.any():
        shading[hit] = shade_lambertian(normals[hit], points[hit],
                                        list(spec.lights), spec.ambient,
                                        occluder=occluder)
    albedo32 = albedo.astype(np.float32)
    shading32 = shading.astype(np.float32)
    color32 = albedo32 * shading32
    return ViewRecord(camera=camera, color=color32, albedo=albedo32,
                      shading=shading32)


def generate_scene(spec: SyntheticSceneSpec, out_dir=None,
                   image_format: str = "float32") -> list[ViewRecord]:
    """Render all ring views; optionally write the dataset directory."""
    cameras = spec.ring.cameras(spec.resolution)
    views = [render_ground_truth(spec, cam) for cam in cameras]
    if out_dir is not None:
        save_dataset(views, out_dir, bounds=spec.bounds, image_format=image_format,
                     extra={"generator": spec.to_json()})
        with open(Path(out_dir) / "scene_spec.json", "w") as f:
            json.dump(spec.to_json(), f, indent=1)
    return views


def checker_orb_spec(resolution: tuple[int, int] = (64, 64),
                     views: int = 24, seed: int = 0) -> SyntheticSceneSpec:
    """Reference desk scene: two spheres over a checkered ground slab, two
    point lights plus ambient."""
    ground = BoxPrim(
        lo=(-2.2, -2.2, -0.25), hi=(2.2, 2.2, 0.0),
        texture=Checkerboard((0.92, 0.90, 0.85), (0.22, 0.26, 0.32), cell=0.55))
    orb_a = Sphere(center=(-0.55, 0.0, 0.5), radius=0.5,
                   texture=SolidColor((0.85, 0.16, 0.12)))
    orb_b = Sphere(center=(0.62, 0.18, 0.42), radius=0.42,
                   texture=Checkerboard((0.16, 0.28, 0.85), (0.92, 0.80, 0.18),
                                        cell=0.3))
    lights = (PointLight((2.5, -2.0, 3.2), 7.0), PointLight((-2.2, 2.6, 2.6), 5.0))
    return SyntheticSceneSpec(
        primitives=(ground, orb_a, orb_b),
        lights=lights,
        ambient=0.08,
        ring=CameraRing(count=views),
        resolution=resolution,
        seed=seed,
    )
