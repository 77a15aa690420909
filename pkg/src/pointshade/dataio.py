"""Dataset records and on-disk format.

A dataset is a directory with `manifest.json` plus per-view images. Images are
linear-intensity (no gamma), stored either as float32 `.npy` arrays (default
for synthetic data, so the color = albedo * shading identity survives storage)
or as 8-bit PNG. Manifest layout:

    {
      "format_version": 1,
      "intensity_space": "linear",
      "image_format": "float32" | "png8",
      "resolution": [H, W],
      "bounds": {"min": [x,y,z], "max": [x,y,z]},
      "views": [
        {"camera": {rotation, translation, focal, principal_point, resolution},
         "color": "view_0000_color.npy",
         "albedo": "view_0000_albedo.npy",
         "shading": "view_0000_shading.npy" | null},
        ...
      ]
    }
"""

from __future__ import annotations

import json
from dataclasses import dataclass
from pathlib import Path

import numpy as np
from PIL import Image

from .camera import Camera
from .scene import Bounds

INTRINSIC_IDENTITY_TOL = 1e-6


class DatasetError(ValueError):
    def __init__(self, message: str, view_index: int | None = None):
        if view_index is not None:
            message = f"view {view_index}: {message}"
        super().__init__(message)
        self.view_index = view_index


@dataclass(frozen=True)
class ViewRecord:
    """One posed view with ground-truth color and albedo (and, for synthetic
    data, the exact shading)."""

    camera: Camera
    color: np.ndarray             # (H, W, 3) float32 in [0, 1]
    albedo: np.ndarray            # (H, W, 3) float32 in [0, 1]
    shading: np.ndarray | None = None

    def validate(self, view_index: int | None = None) -> None:
        h, w = self.camera.resolution
        for name, img in (("color", self.color), ("albedo", self.albedo),
                          ("shading", self.shading)):
            if img is None:
                continue
            if img.shape != (h, w, 3):
                raise DatasetError(
                    f"{name} image shape {img.shape} does not match camera "
                    f"resolution {h}x{w}", view_index)
            if not np.all(np.isfinite(img)):
                raise DatasetError(f"non-finite pixels in {name}", view_index)
            if img.min() < 0.0 or img.max() > 1.0:
                raise DatasetError(
                    f"{name} pixels outside [0, 1]: range "
                    f"[{img.min():.4g}, {img.max():.4g}]", view_index)
        if self.shading is not None:
            err = np.abs(self.color - self.albedo * self.shading).max()
            if err > INTRINSIC_IDENTITY_TOL:
                raise DatasetError(
                    f"color != albedo * shading (max abs err {err:.3e})", view_index)


def _save_image(img: np.ndarray, path: Path, fmt: str) -> None:
    if fmt == "float32":
        np.save(path, img.astype(np.float32))
    elif fmt == "png8":
        arr = np.clip(np.round(img * 255.0), 0, 255).astype(np.uint8)
        Image.fromarray(arr).save(path)
    else:
        raise DatasetError(f"unknown image format {fmt!r}")


def _load_image(path: Path, fmt: str) -> np.ndarray:
    if not path.exists():
        raise FileNotFoundError(path)
    if fmt == "float32":
        return np.load(path).astype(np.float32)
    arr = np.asarray(Image.open(path), dtype=np.float32) / 255.0
    return arr


def save_dataset(
    views: list[ViewRecord],
    path,
    bounds: Bounds,
    image_format: str = "float32",
    extra: dict | None = None,
) -> None:
    """Write the dataset directory; validates every view first."""
    out = Path(path)
    out.mkdir(parents=True, exist_ok=True)
    ext = "npy" if image_format == "float32" else "png"
    manifest_views = []
    for i, view in enumerate(views):
        view.validate(i)
        entry = {"camera": view.camera.to_json()}
        for name, img in (("color", view.color), ("albedo", view.albedo),
                          ("shading", view.shading)):
            if img is None:
                entry[name] = None
                continue
            fname = f"view_{i:04d}_{name}.{ext}"
            _save_image(img, out / fname, image_format)
            entry[name] = fname
        manifest_views.append(entry)
    h, w = views[0].camera.resolution if views else (0, 0)
    manifest = {
        "format_version": 1,
        "intensity_space": "linear",
        "image_format": image_format,
        "resolution": [h, w],
        "bounds": bounds.to_json(),
        "views": manifest_views,
    }
    if extra:
        manifest.update(extra)
    with open(out / "manifest.json", "w") as f:
        json.dump(manifest, f, indent=1)


def load_dataset(path) -> tuple[list[ViewRecord], dict]:
    """Load and validate a dataset directory. Returns (views, manifest)."""
    root = Path(path)
    manifest_path = root / "manifest.json"
    if not manifest_path.exists():
        raise DatasetError(f"no manifest.json under {root}")
    try:
        manifest = json.loads(manifest_path.read_text())
    except json.JSONDecodeError as e:
        raise DatasetError(f"malformed manifest: {e}") from e
    fmt = manifest.get("image_format", "float32")
    res = manifest.get("resolution")
    views = []
    for i, entry in enumerate(manifest.get("views", [])):
        try:
            camera = Camera.from_json(entry["camera"])
        except (KeyError, ValueError) as e:
            raise DatasetError(f"bad camera: {e}", i) from e
        if res is not None and list(camera.resolution) != list(res):
            raise DatasetError(
                f"camera resolution {camera.resolution} does not match "
                f"manifest resolution {res}", i)
        imgs = {}
        for name in ("color", "albedo", "shading"):
            fname = entry.get(name)
            if fname is None:
                if name == "shading":
                    imgs[name] = None
                    continue
                raise DatasetError(f"missing {name} image entry", i)
            try:
                imgs[name] = _load_image(root / fname, fmt)
            except FileNotFoundError:
                raise DatasetError(f"{name} image file not found: {fname}", i)
        view = ViewRecord(camera=camera, color=imgs["color"],
                          albedo=imgs["albedo"], shading=imgs["shading"])
        view.validate(i)
        views.append(view)
    return views, manifest


def dataset_bounds(manifest: dict) -> Bounds:
    return Bounds.from_json(manifest["bounds"])
