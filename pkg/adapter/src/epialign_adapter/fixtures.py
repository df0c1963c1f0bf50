"""Fabricated prediction fixtures shaped like feed-forward model outputs.

Tests and demos never run model inference; this generator produces
prediction-shaped arrays (a camera ring with float32 storage, sparse depth,
and confidence-scored correspondences) that exercise the export path.
"""

from __future__ import annotations

import numpy as np

from .export import AdapterManifest, FrameSpec, PredictionSet


def _look_at(center: np.ndarray) -> np.ndarray:
    z = -center / np.linalg.norm(center)
    up = np.array([0.0, 0.0, 1.0])
    x = np.cross(z, up)
    if np.linalg.norm(x) < 1e-8:
        x = np.cross(z, np.array([0.0, 1.0, 0.0]))
    x /= np.linalg.norm(x)
    y = np.cross(z, x)
    return np.stack([x, y, z])


def make_fixture(n_frames: int = 8, width: int = 320, height: int = 240,
                 matches_per_pair: int = 64, seed: int = 0, out_dir: str = ".",
                 source: str = "vggt",
                 ) -> tuple[AdapterManifest, PredictionSet]:
    """A manifest plus float32 prediction arrays for ``n_frames`` cameras."""
    rng = np.random.default_rng(seed)
    focal = 0.6 * width
    K = np.array([[focal, 0.0, (width - 1) / 2.0],
                  [0.0, focal, (height - 1) / 2.0],
                  [0.0, 0.0, 1.0]])

    theta = 2.0 * np.pi * np.arange(n_frames) / n_frames
    centers = np.stack([3.0 * np.cos(theta), 3.0 * np.sin(theta),
                        rng.uniform(-0.3, 0.3, n_frames)], axis=1)
    rotations = np.empty((n_frames, 3, 3), dtype=np.float32)
    translations = np.empty((n_frames, 3), dtype=np.float32)
    for i in range(n_frames):
        R = _look_at(centers[i])
        rotations[i] = R.astype(np.float32)
        translations[i] = (-R @ centers[i]).astype(np.float32)

    depth = np.zeros((n_frames, height, width), dtype=np.float32)
    filled = rng.random((n_frames, height, width)) < 0.2
    depth[filled] = rng.uniform(1.5, 5.0, int(filled.sum())).astype(np.float32)

    ring = [(i, (i + 1) % n_frames) for i in range(n_frames)]
    pairs = [(min(i, j), max(i, j)) for i, j in ring]
    pairs = sorted(set(pairs))
    match_frames = np.array(pairs, dtype=np.int64)
    counts = np.full(len(pairs), matches_per_pair, dtype=np.int64)
    match_offsets = np.concatenate([[0], np.cumsum(counts)])
    k_total = int(match_offsets[-1])
    match_uv = np.empty((k_total, 4), dtype=np.float32)
    match_uv[:, 0] = rng.uniform(0, width - 1, k_total)
    match_uv[:, 1] = rng.uniform(0, height - 1, k_total)
    match_uv[:, 2] = rng.uniform(0, width - 1, k_total)
    match_uv[:, 3] = rng.uniform(0, height - 1, k_total)
    match_confidence = rng.uniform(0.05, 1.0, k_total).astype(np.float32)

    manifest = AdapterManifest(
        source=source,
        frames=tuple(FrameSpec(f"frame_{i:04d}", f"images/frame_{i:04d}.png",
                               width, height) for i in range(n_frames)),
        output_dir=str(out_dir),
    )
    preds = PredictionSet(
        intrinsics=np.repeat(K[None].astype(np.float32), n_frames, axis=0),
        rotations=rotations,
        translations=translations,
        depth=depth,
        match_frames=match_frames,
        match_offsets=match_offsets,
        match_uv=match_uv,
        match_confidence=match_confidence,
    )
    return manifest, preds
