"""Procedural two-domain benchmarks for segmentation, depth, and flow.

A scene (content) is a handful of colored shapes over a background; the same
scene renders under a per-domain style (hue rotation, background texture,
blur, sensor noise).  Targets depend only on the scene, never on the style,
so the two domains are pixel-level shifts of identical content: labeled
source split, unlabeled target split, held-out target validation split (plus
a paired source-style rendering of the validation scenes for measuring the
domain gap).
"""

from __future__ import annotations

import hashlib
import json
import os
from dataclasses import asdict, dataclass, field
from typing import Dict, List, Optional, Tuple

import numpy as np

from . import io
from .core import (
    Depth,
    DepthTarget,
    Flow,
    FlowTarget,
    ImageGrid,
    SegTarget,
    Segmentation,
    TaskKind,
    quantize_unit,
    task_kind_from_name,
)

GENERATOR_VERSION = 1
NUM_CLASSES = 4  # background + circle/square/triangle
SHAPE_KINDS = ("circle", "square", "triangle")
BACKGROUND_DEPTH = 4.0
SHAPE_DEPTH_NEAR = 1.0
SHAPE_DEPTH_STEP = 0.35

CLASS_COLORS = np.array(
    [
        [-0.10, -0.10, -0.10],  # background
        [0.70, -0.45, -0.45],   # circle
        [-0.45, 0.60, -0.35],   # square
        [-0.35, -0.40, 0.70],   # triangle
    ],
    dtype=np.float64,
)


@dataclass(frozen=True)
class ShapeSpec:
    kind: str
    class_id: int
    center: Tuple[float, float]  # (y, x) in pixels
    scale: float                 # radius-ish, pixels
    depth_rank: int              # 0 = nearest
    motion: Tuple[float, float]  # (dy, dx) displacement for the second frame


@dataclass(frozen=True)
class SceneSpec:
    seed: int
    canvas: Tuple[int, int]
    shapes: Tuple[ShapeSpec, ...]
    brightness: float  # content-side jitter, shared by both domains
    texture_phase: float


@dataclass(frozen=True)
class StyleSpec:
    domain: str  # "S" | "T"
    hue_rot_deg: float = 0.0
    bg_texture_amp: float = 0.0
    blur_px: int = 0
    noise_sigma: float = 0.0

    def to_dict(self):
        return asdict(self)

    @staticmethod
    def from_dict(d):
        return StyleSpec(**d)


SOURCE_STYLE = StyleSpec(domain="S")
TARGET_STYLE = StyleSpec(domain="T", hue_rot_deg=40.0, bg_texture_amp=0.25, blur_px=1, noise_sigma=0.05)


def generate_scene(seed: int, task: TaskKind, canvas=(64, 64)) -> SceneSpec:
    """Deterministic scene from a seed; content is domain-invariant."""
    rng = np.random.default_rng([GENERATOR_VERSION, int(seed)])
    h, w = canvas
    n_shapes = int(rng.integers(2, 6))
    moving = isinstance(task, Flow)
    ranks = rng.permutation(n_shapes)
    shapes = []
    for i in range(n_shapes):
        kind = SHAPE_KINDS[int(rng.integers(0, len(SHAPE_KINDS)))]
        scale = float(rng.uniform(0.09, 0.20) * min(h, w))
        motion = (float(rng.integers(-3, 4)), float(rng.integers(-3, 4))) if moving else (0.0, 0.0)
        margin = scale + max(abs(motion[0]), abs(motion[1])) + 1.0
        cy = float(rng.uniform(margin, h - margin))
        cx = float(rng.uniform(margin, w - margin))
        shapes.append(ShapeSpec(kind, SHAPE_KINDS.index(kind) + 1, (cy, cx), scale, int(ranks[i]), motion))
    return SceneSpec(
        seed=int(seed),
        canvas=(h, w),
        shapes=tuple(shapes),
        brightness=float(rng.uniform(0.9, 1.1)),
        texture_phase=float(rng.uniform(0, 2 * np.pi)),
    )


def _shape_mask(shape: ShapeSpec, canvas, offset=(0.0, 0.0)):
    h, w = canvas
    yy, xx = np.mgrid[0:h, 0:w].astype(np.float64)
    cy, cx = shape.center[0] + offset[0], shape.center[1] + offset[1]
    dy, dx = yy - cy, xx - cx
    if shape.kind == "circle":
        return dy * dy + dx * dx <= shape.scale**2
    if shape.kind == "square":
        return np.maximum(np.abs(dy), np.abs(dx)) <= shape.scale
    # upward-pointing triangle: apex at dy = -s, base at dy = 0.6 s
    s = shape.scale
    return (dy <= 0.6 * s) & (np.abs(dx) <= 0.5625 * (dy + s))


def _hue_rotation_matrix(degrees):
    """Rotation of RGB space about the gray axis."""
    theta = np.deg2rad(degrees)
    c, s = np.cos(theta), np.sin(theta)
    axis = np.ones(3) / np.sqrt(3.0)
    k = np.array([
        [0, -axis[2], axis[1]],
        [axis[2], 0, -axis[0]],
        [-axis[1], axis[0], 0],
    ])
    return np.eye(3) * c + s * k + (1 - c) * np.outer(axis, axis)


def _box_blur(img, radius):
    if radius <= 0:
        return img
    out = img
    k = 2 * radius + 1
    for _ in range(1):
        padded = np.pad(out, ((radius, radius), (radius, radius), (0, 0)), mode="edge")
        acc = np.zeros_like(out)
        for dy in range(k):
            for dx in range(k):
                acc += padded[dy : dy + out.shape[0], dx : dx + out.shape[1]]
        out = acc / (k * k)
    return out


def _render_frame(spec: SceneSpec, style: StyleSpec, offset_scale: float, frame_idx: int):
    h, w = spec.canvas
    img = np.empty((h, w, 3), dtype=np.float64)
    gradient = np.linspace(-0.06, 0.06, h)[:, None]
    img[:] = CLASS_COLORS[0] * spec.brightness
    img[:, :, 1] += gradient  # mild content-side vertical shading
    if style.bg_texture_amp > 0:
        yy, xx = np.mgrid[0:h, 0:w].astype(np.float64)
        tex = style.bg_texture_amp * np.sin(2 * np.pi * (xx + yy) / 8.0 + spec.texture_phase)
        img += tex[:, :, None]
    for shape in sorted(spec.shapes, key=lambda s: -s.depth_rank):  # far to near
        off = (shape.motion[0] * offset_scale, shape.motion[1] * offset_scale)
        mask = _shape_mask(shape, spec.canvas, off)
        img[mask] = CLASS_COLORS[shape.class_id] * spec.brightness
    if style.hue_rot_deg:
        img = img @ _hue_rotation_matrix(style.hue_rot_deg).T
    img = _box_blur(img, style.blur_px)
    if style.noise_sigma > 0:
        noise_rng = np.random.default_rng(
            [GENERATOR_VERSION, spec.seed, frame_idx, 0 if style.domain == "S" else 1]
        )
        img += noise_rng.normal(0.0, style.noise_sigma, img.shape)
    return np.clip(img, -1.0, 1.0)


def render(spec: SceneSpec, style: StyleSpec, task: TaskKind):
    """Render (image, target); the target never depends on the style."""
    h, w = spec.canvas
    frames = [_render_frame(spec, style, 0.0, 0)]
    if isinstance(task, Flow):
        frames.append(_render_frame(spec, style, 1.0, 1))
    image = ImageGrid(quantize_unit(np.concatenate(frames, axis=2)))

    by_depth = sorted(spec.shapes, key=lambda s: -s.depth_rank)
    if isinstance(task, Segmentation):
        classes = np.zeros((h, w), np.int32)
        for shape in by_depth:
            classes[_shape_mask(shape, spec.canvas)] = shape.class_id
        return image, SegTarget(classes)
    if isinstance(task, Depth):
        depth = np.full((h, w), BACKGROUND_DEPTH, np.float32)
        for shape in by_depth:
            depth[_shape_mask(shape, spec.canvas)] = SHAPE_DEPTH_NEAR + SHAPE_DEPTH_STEP * shape.depth_rank
        return image, DepthTarget(depth)
    if isinstance(task, Flow):
        flow = np.zeros((h, w, 2), np.float32)
        for shape in by_depth:
            mask = _shape_mask(shape, spec.canvas)
            flow[mask] = (shape.motion[1], shape.motion[0])  # (u, v) = (dx, dy)
        return image, FlowTarget(flow)
    raise ValueError(f"unknown task kind {task!r}")


# ---------------------------------------------------------------------------
# on-disk benchmarks


SPLIT_SEED_OFFSETS = {"train_s": 0, "train_t": 100_000, "val_t": 200_000, "val_s": 200_000}
SPLIT_STYLES = {"train_s": "S", "train_t": "T", "val_t": "T", "val_s": "S"}
SPLIT_HAS_TARGETS = {"train_s": True, "train_t": False, "val_t": True, "val_s": True}


def _target_path(split_dir, index, task):
    if isinstance(task, Segmentation):
        return os.path.join(split_dir, f"{index:05d}_labels.png")
    return os.path.join(split_dir, f"{index:05d}.crdo")


def _write_target(path, target):
    if isinstance(target, SegTarget):
        io.save_class_map_png(path, target.classes)
    elif isinstance(target, DepthTarget):
        packed = np.where(target.valid, target.depth, 0.0).astype(np.float32)
        io.save_grid_crdo(path, packed)  # invalid pixels encoded as 0 (non-positive)
    elif isinstance(target, FlowTarget):
        packed = np.concatenate(
            [target.flow, target.valid[:, :, None].astype(np.float32)], axis=2
        )
        io.save_grid_crdo(path, packed)
    else:
        raise ValueError(f"unknown target type {type(target).__name__}")


def _read_target(path, task):
    if isinstance(task, Segmentation):
        return SegTarget(io.load_class_map_png(path))
    grid = io.load_grid_crdo(path)
    if isinstance(task, Depth):
        depth = grid[:, :, 0]
        return DepthTarget(np.where(depth > 0, depth, 1.0), depth > 0)
    return FlowTarget(grid[:, :, :2], grid[:, :, 2] > 0.5)


def build_benchmark(root, name, task: TaskKind, sizes=None, seed_base=0,
                    styles=None, canvas=(64, 64), overwrite=False) -> str:
    """Generate and write a benchmark; returns the dataset directory."""
    sizes = dict(sizes or {"train_s": 2000, "train_t": 2000, "val_t": 200})
    for split, count in sizes.items():
        if count > 50_000:
            raise ValueError(f"{split} size {count} would overlap another split's seed range")
    styles = styles or {"S": SOURCE_STYLE, "T": TARGET_STYLE}
    out_dir = os.path.join(root, name)
    if os.path.exists(out_dir):
        if not overwrite:
            raise FileExistsError(f"{out_dir} already exists (pass overwrite to replace)")
        import shutil

        shutil.rmtree(out_dir)
    os.makedirs(out_dir)

    task_name = task.name
    manifest = {
        "format_version": 1,
        "generator_version": GENERATOR_VERSION,
        "name": name,
        "task": task_name,
        "num_classes": task.num_classes if isinstance(task, Segmentation) else None,
        "canvas": list(canvas),
        "seed_base": int(seed_base),
        "styles": {key: style.to_dict() for key, style in styles.items()},
        "splits": {},
    }
    split_plan = dict(sizes)
    split_plan["val_s"] = sizes["val_t"]  # paired scenes for the domain-gap witness
    for split, count in split_plan.items():
        start = seed_base + SPLIT_SEED_OFFSETS[split]
        manifest["splits"][split] = {
            "count": int(count),
            "seed_start": int(start),
            "style": SPLIT_STYLES[split],
            "targets": SPLIT_HAS_TARGETS[split],
        }

    for split, info in manifest["splits"].items():
        split_dir = os.path.join(out_dir, split)
        os.makedirs(split_dir)
        style = styles[info["style"]]
        for i in range(info["count"]):
            spec = generate_scene(info["seed_start"] + i, task, canvas)
            image, target = render(spec, style, task)
            io.save_image_png(os.path.join(split_dir, f"{i:05d}.png"), image)
            if info["targets"]:
                _write_target(_target_path(split_dir, i, task), target)

    with open(os.path.join(out_dir, "manifest.json"), "w") as f:
        json.dump(manifest, f, indent=2, sort_keys=True)
    return out_dir


def manifest_hash(dataset_dir) -> str:
    with open(os.path.join(dataset_dir, "manifest.json"), "rb") as f:
        return hashlib.sha256(f.read()).hexdigest()


@dataclass
class SplitData:
    """One split held in memory, images as (N, C, H, W) float32."""

    images: np.ndarray
    targets: Optional[list]


@dataclass
class BenchmarkData:
    path: str
    task: TaskKind
    hash: str
    splits: Dict[str, SplitData] = field(default_factory=dict)

    @property
    def channels(self):
        return 6 if isinstance(self.task, Flow) else 3


def load_benchmark(dataset_dir, splits=None) -> BenchmarkData:
    with open(os.path.join(dataset_dir, "manifest.json")) as f:
        manifest = json.load(f)
    task = task_kind_from_name(manifest["task"], manifest.get("num_classes") or 4)
    channels = 6 if isinstance(task, Flow) else 3
    data = BenchmarkData(path=dataset_dir, task=task, hash=manifest_hash(dataset_dir))
    for split, info in manifest["splits"].items():
        if splits is not None and split not in splits:
            continue
        split_dir = os.path.join(dataset_dir, split)
        images = []
        targets = [] if info["targets"] else None
        for i in range(info["count"]):
            grid = io.load_image_png(os.path.join(split_dir, f"{i:05d}.png"), channels=channels)
            images.append(grid.values.transpose(2, 0, 1))
            if info["targets"]:
                targets.append(_read_target(_target_path(split_dir, i, task), task))
        data.splits[split] = SplitData(np.ascontiguousarray(np.stack(images)), targets)
    return data
