"""Pinhole cameras, rays, and the projection conventions used everywhere else.

Conventions (also documented in the dataset format):
  - World-to-camera transform: x_cam = R @ x_world + t. Camera center is -R^T t.
  - Camera frame is right-handed with x right, y up; the camera looks down -z.
  - Pixel (row r, col c) has center (u, v) = (c + 0.5, r + 0.5); u grows right,
    v grows down. Projection: u = cx + f*X/(-Z), v = cy - f*Y/(-Z).
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

ORTHONORMAL_TOL = 1e-9


class CameraError(ValueError):
    pass


@dataclass(frozen=True)
class Camera:
    """Pinhole camera with a single focal length in pixels."""

    rotation: np.ndarray       # (3, 3) world -> camera
    translation: np.ndarray    # (3,)
    focal: float
    principal_point: np.ndarray  # (cx, cy) in pixels
    resolution: tuple[int, int]  # (H, W)

    def __post_init__(self):
        r = np.asarray(self.rotation, dtype=np.float64)
        t = np.asarray(self.translation, dtype=np.float64)
        pp = np.asarray(self.principal_point, dtype=np.float64)
        if r.shape != (3, 3):
            raise CameraError(f"rotation must be 3x3, got {r.shape}")
        if t.shape != (3,):
            raise CameraError(f"translation must be a 3-vector, got {t.shape}")
        if pp.shape != (2,):
            raise CameraError(f"principal point must be a 2-vector, got {pp.shape}")
        err = np.abs(r @ r.T - np.eye(3)).max()
        if err > ORTHONORMAL_TOL:
            raise CameraError(f"rotation not orthonormal: |R R^T - I| = {err:.3e}")
        if not self.focal > 0:
            raise CameraError(f"focal length must be positive, got {self.focal}")
        h, w = self.resolution
        if h < 1 or w < 1:
            raise CameraError(f"resolution must be >= 1x1, got {self.resolution}")
        r.setflags(write=False)
        t.setflags(write=False)
        pp.setflags(write=False)
        object.__setattr__(self, "rotation", r)
        object.__setattr__(self, "translation", t)
        object.__setattr__(self, "principal_point", pp)
        object.__setattr__(self, "resolution", (int(h), int(w)))

    @property
    def center(self) -> np.ndarray:
        """Camera center in world coordinates."""
        return -self.rotation.T @ self.translation

    def to_json(self) -> dict:
        return {
            "rotation": self.rotation.tolist(),
            "translation": self.translation.tolist(),
            "focal": float(self.focal),
            "principal_point": self.principal_point.tolist(),
            "resolution": [int(self.resolution[0]), int(self.resolution[1])],
        }

    @staticmethod
    def from_json(d: dict) -> "Camera":
        return Camera(
            rotation=np.asarray(d["rotation"], dtype=np.float64),
            translation=np.asarray(d["translation"], dtype=np.float64),
            focal=float(d["focal"]),
            principal_point=np.asarray(d["principal_point"], dtype=np.float64),
            resolution=(int(d["resolution"][0]), int(d["resolution"][1])),
        )


@dataclass(frozen=True)
class Ray:
    origin: np.ndarray
    direction: np.ndarray  # unit norm

    def __post_init__(self):
        o = np.asarray(self.origin, dtype=np.float64)
        d = np.asarray(self.direction, dtype=np.float64)
        n = np.linalg.norm(d)
        if abs(n - 1.0) > 1e-9:
            raise CameraError(f"ray direction must be unit norm, |d| = {n}")
        o.setflags(write=False)
        d.setflags(write=False)
        object.__setattr__(self, "origin", o)
        object.__setattr__(self, "direction", d)


def generate_rays(camera: Camera) -> tuple[np.ndarray, np.ndarray]:
    """Per-pixel rays through pixel centers.

    Returns (origins, directions), both (H, W, 3) float64. All origins equal the
    camera center; directions are unit norm in world coordinates.
    """
    h, w = camera.resolution
    cx, cy = camera.principal_point
    f = camera.focal
    u = np.arange(w, dtype=np.float64) + 0.5
    v = np.arange(h, dtype=np.float64) + 0.5
    uu, vv = np.meshgrid(u, v)  # (H, W)
    # Camera looks down -z; v grows downward while Y_cam points up.
    x = (uu - cx) / f
    y = -(vv - cy) / f
    z = -np.ones_like(x)
    dirs_cam = np.stack([x, y, z], axis=-1)
    dirs_world = dirs_cam @ camera.rotation  # == (R^T @ d) row-wise
    dirs_world /= np.linalg.norm(dirs_world, axis=-1, keepdims=True)
    origins = np.broadcast_to(camera.center, (h, w, 3)).copy()
    return origins, dirs_world


def ray_for_pixel(camera: Camera, row: int, col: int) -> Ray:
    """Single ray through the center of pixel (row, col)."""
    h, w = camera.resolution
    if not (0 <= row < h and 0 <= col < w):
        raise CameraError(f"pixel ({row}, {col}) outside {h}x{w} image")
    cx, cy = camera.principal_point
    d_cam = np.array([
        (col + 0.5 - cx) / camera.focal,
        -(row + 0.5 - cy) / camera.focal,
        -1.0,
    ])
    d_world = camera.rotation.T @ d_cam
    d_world /= np.linalg.norm(d_world)
    return Ray(origin=camera.center, direction=d_world)


def project_points(camera: Camera, points: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
    """Project world points to pixel coordinates (u, v).

    Returns (uv, depth) with uv shape (..., 2) and depth (...,) the distance
    along the viewing axis (positive in front of the camera).
    """
    p = np.asarray(points, dtype=np.float64)
    x_cam = p @ camera.rotation.T + camera.translation
    depth = -x_cam[..., 2]
    cx, cy = camera.principal_point
    with np.errstate(divide="ignore", invalid="ignore"):
        u = cx + camera.focal * x_cam[..., 0] / depth
        v = cy - camera.focal * x_cam[..., 1] / depth
    return np.stack([u, v], axis=-1), depth


def pixel_of_point(camera: Camera, point: np.ndarray) -> tuple[int, int]:
    """Nearest pixel (row, col) a world point projects to; raises if off-screen."""
    uv, depth = project_points(camera, np.asarray(point))
    if depth <= 0:
        raise CameraError("point is behind the camera")
    col = int(np.floor(uv[0]))
    row = int(np.floor(uv[1]))
    h, w = camera.resolution
    if not (0 <= row < h and 0 <= col < w):
        raise CameraError(f"point projects outside the image: ({row}, {col})")
    return row, col


def look_at_camera(
    eye: np.ndarray,
    target: np.ndarray,
    focal: float,
    resolution: tuple[int, int],
    up: np.ndarray = (0.0, 0.0, 1.0),
    principal_point: np.ndarray | None = None,
) -> Camera:
    """Camera at `eye` looking toward `target`, world `up` kept upward on screen."""
    eye = np.asarray(eye, dtype=np.float64)
    target = np.asarray(target, dtype=np.float64)
    up = np.asarray(up, dtype=np.float64)
    forward = target - eye
    fn = np.linalg.norm(forward)
    if fn < 1e-12:
        raise CameraError("eye and target coincide")
    forward = forward / fn
    z_cam = -forward
    x_cam = np.cross(up, z_cam)
    xn = np.linalg.norm(x_cam)
    if xn < 1e-12:
        raise CameraError("viewing direction parallel to the up vector")
    x_cam = x_cam / xn
    y_cam = np.cross(z_cam, x_cam)
    rot = np.stack([x_cam, y_cam, z_cam], axis=0)
    # Re-orthonormalize to survive the strict constructor tolerance.
    uu, _, vv = np.linalg.svd(rot)
    rot = uu @ vv
    t = -rot @ eye
    h, w = resolution
    if principal_point is None:
        principal_point = np.array([w / 2.0, h / 2.0])
    return Camera(rotation=rot, translation=t, focal=focal,
                  principal_point=np.asarray(principal_point, dtype=np.float64),
                  resolution=(h, w))
