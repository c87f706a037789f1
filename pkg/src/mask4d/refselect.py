"""Reference-image selection by mean embedding similarity.

Candidate object images are scored against sampled masked-object crops
from the video: each candidate's score is the mean cosine similarity
between its embedding and the frame-crop embeddings, and the winner is
the argmax (ties to the lowest index).  Embeddings come from a pluggable
provider; the shipped baseline embedder (grayscale 16x16 area-average,
mean-subtracted, L2-normalized) keeps the whole pipeline testable offline,
and an HTTP client provider integrates real models without linking any ML
runtime.
"""

from __future__ import annotations

import io
import json
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from pathlib import Path
from typing import Protocol, runtime_checkable

import numpy as np
from PIL import Image, UnidentifiedImageError

from .errors import DegenerateEmbeddingError, FormatError, ValidationError

BASELINE_GRID = 16
BASELINE_DIM = BASELINE_GRID * BASELINE_GRID

# all-constant images have no direction after mean subtraction; they map
# to a fixed canonical unit vector instead of dividing by zero
CANONICAL_DEGENERATE = np.zeros(BASELINE_DIM)
CANONICAL_DEGENERATE[0] = 1.0
CANONICAL_DEGENERATE.setflags(write=False)

_ZERO_NORM_TOL = 1e-12
_GRAY_WEIGHTS = np.array([0.299, 0.587, 0.114])


def _decode_image(image) -> np.ndarray:
    """Accept PNG/JPEG bytes, a PIL image, or an ndarray; return float64 gray."""
    if isinstance(image, (bytes, bytearray)):
        try:
            with Image.open(io.BytesIO(image)) as img:
                arr = np.asarray(img.convert("RGB"), dtype=np.float64)
        except UnidentifiedImageError as exc:
            raise FormatError(f"undecodable image bytes: {exc}") from exc
    elif isinstance(image, Image.Image):
        arr = np.asarray(image.convert("RGB"), dtype=np.float64)
    else:
        arr = np.asarray(image, dtype=np.float64)
    if arr.ndim == 3:
        return arr @ _GRAY_WEIGHTS
    if arr.ndim == 2:
        return arr
    raise FormatError(f"unsupported image array shape {arr.shape}")


def _area_average_weights(src: int, dst: int) -> np.ndarray:
    """(dst, src) matrix of exact interval-overlap area weights."""
    w = np.zeros((dst, src))
    cell = src / dst
    for i in range(dst):
        lo, hi = i * cell, (i + 1) * cell
        j0, j1 = int(np.floor(lo)), int(np.ceil(hi))
        for j in range(j0, min(j1, src)):
            overlap = min(hi, j + 1) - max(lo, j)
            if overlap > 0:
                w[i, j] = overlap / cell
    return w


def baseline_embed(image) -> np.ndarray:
    """Deterministic image embedding: 16x16 area-average, mean-sub, unit L2.

    Invariant to uniform brightness shifts by construction.  All-constant
    images return the canonical degenerate vector (see
    ``CANONICAL_DEGENERATE``).

    Raises:
        FormatError: the image cannot be decoded.
    """
    gray = _decode_image(image)
    if gray.size == 0:
        raise FormatError("empty image")
    h, w = gray.shape
    wr = _area_average_weights(h, BASELINE_GRID)
    wc = _area_average_weights(w, BASELINE_GRID)
    small = wr @ gray @ wc.T
    vec = small.ravel()
    vec = vec - vec.mean()
    norm = np.linalg.norm(vec)
    if norm < _ZERO_NORM_TOL:
        return CANONICAL_DEGENERATE.copy()
    return vec / norm


def is_degenerate(vector: np.ndarray) -> bool:
    """True for the canonical constant-image embedding."""
    v = np.asarray(vector)
    return v.shape == CANONICAL_DEGENERATE.shape and np.array_equal(
        v, CANONICAL_DEGENERATE
    )


@runtime_checkable
class EmbeddingProvider(Protocol):
    """Anything that deterministically maps image bytes to a vector."""

    name: str
    dimension: int

    def embed(self, image: bytes) -> np.ndarray: ...


class BaselineEmbedder:
    """The offline 16x16 grayscale embedder as a provider."""

    name = "baseline-16x16"
    dimension = BASELINE_DIM

    def embed(self, image) -> np.ndarray:
        return baseline_embed(image)

    def embed_many(self, images) -> list[np.ndarray]:
        return [self.embed(img) for img in images]


class HttpEmbedder:
    """Client for an external embedding service.

    Contract: POST the PNG bytes, receive a JSON array of reals.  In-flight
    requests are bounded by ``max_in_flight``.
    """

    def __init__(self, endpoint: str, name: str = "http", max_in_flight: int = 4,
                 timeout: float = 30.0, client=None):
        import httpx

        self.endpoint = endpoint
        self.name = name
        self.dimension = -1  # learned from the first response
        self.max_in_flight = max_in_flight
        self._client = client if client is not None else httpx.Client(timeout=timeout)

    def embed(self, image: bytes) -> np.ndarray:
        resp = self._client.post(
            self.endpoint, content=bytes(image),
            headers={"content-type": "image/png"},
        )
        resp.raise_for_status()
        vec = np.asarray(resp.json(), dtype=np.float64)
        if vec.ndim != 1:
            raise FormatError("embedding service returned a non-vector payload")
        norm = np.linalg.norm(vec)
        if norm < _ZERO_NORM_TOL:
            raise DegenerateEmbeddingError("embedding service returned a zero vector")
        if self.dimension < 0:
            self.dimension = vec.shape[0]
        return vec / norm

    def embed_many(self, images) -> list[np.ndarray]:
        with ThreadPoolExecutor(max_workers=self.max_in_flight) as pool:
            return list(pool.map(self.embed, images))


@dataclass
class CandidateSet:
    """Candidates, sampled frame crops, and (once computed) scores."""

    candidate_embeddings: np.ndarray  # (m, D)
    frame_embeddings: np.ndarray  # (N, D)
    candidate_names: list[str] = field(default_factory=list)
    scores: np.ndarray | None = None
    selected: int | None = None


def score_candidates(candidates, frames) -> np.ndarray:
    """Mean cosine similarity of each candidate against all frame crops.

    ``s_k = (1/N) * sum_j cos(candidate_k, frame_j)``, each term in [-1, 1].

    Raises:
        ValidationError: empty inputs or dimension mismatch.
        DegenerateEmbeddingError: a zero vector on either side.
    """
    c = np.asarray(candidates, dtype=np.float64)
    f = np.asarray(frames, dtype=np.float64)
    if c.ndim != 2 or f.ndim != 2 or c.shape[0] == 0 or f.shape[0] == 0:
        raise ValidationError("need at least one candidate and one frame embedding")
    if c.shape[1] != f.shape[1]:
        raise ValidationError(
            f"embedding dimensions differ: {c.shape[1]} vs {f.shape[1]}"
        )
    cn = np.linalg.norm(c, axis=1)
    fn = np.linalg.norm(f, axis=1)
    if np.any(cn < _ZERO_NORM_TOL) or np.any(fn < _ZERO_NORM_TOL):
        raise DegenerateEmbeddingError("zero-norm embedding vector")
    sims = (c / cn[:, None]) @ (f / fn[:, None]).T
    return sims.mean(axis=1)


def select_reference(scores) -> int:
    """Argmax over candidate scores; exact ties go to the lowest index.

    Raises:
        ValidationError: empty score list.
    """
    s = np.asarray(scores, dtype=np.float64)
    if s.size == 0:
        raise ValidationError("cannot select from an empty candidate set")
    return int(np.argmax(s))


def masked_object_crop(frame_rgb: np.ndarray, mask: np.ndarray) -> np.ndarray | None:
    """Crop the mask's bounding box; background outside the mask goes white.

    Returns None when the mask is empty (frame does not show the object).
    """
    sel = mask > 0
    if not sel.any():
        return None
    ys, xs = np.nonzero(sel)
    y0, y1 = ys.min(), ys.max() + 1
    x0, x1 = xs.min(), xs.max() + 1
    crop = frame_rgb[y0:y1, x0:x1].copy()
    crop[~sel[y0:y1, x0:x1]] = 255
    return crop


def _png_bytes(rgb: np.ndarray) -> bytes:
    buf = io.BytesIO()
    Image.fromarray(np.asarray(rgb, dtype=np.uint8)).save(buf, format="PNG")
    return buf.getvalue()


def select_reference_from_dirs(
    frames_dir, masks_dir, candidates_dir, provider: EmbeddingProvider | None = None
) -> dict:
    """End-to-end selection over directories of PNG frames/masks/candidates.

    Frames and masks are paired by sorted filename order; frames whose mask
    is empty are skipped.  Returns the ``selection.json`` payload:
    ``{"scores": [...], "selected": k, "provider": name, ...}``.
    """
    from .bundle import read_png

    provider = provider or BaselineEmbedder()
    frame_paths = sorted(Path(frames_dir).glob("*.png"))
    mask_paths = sorted(Path(masks_dir).glob("*.png"))
    cand_paths = sorted(Path(candidates_dir).glob("*.png"))
    if not cand_paths:
        raise ValidationError(f"no candidate images in {candidates_dir}")
    if len(frame_paths) != len(mask_paths):
        raise ValidationError(
            f"{len(frame_paths)} frames vs {len(mask_paths)} masks"
        )

    crops = []
    for fp, mp in zip(frame_paths, mask_paths):
        crop = masked_object_crop(read_png(fp), read_png(mp)[..., 0])
        if crop is not None:
            crops.append(crop)
    if not crops:
        raise ValidationError("no frame contains a non-empty object mask")

    frame_vecs = np.stack([provider.embed(_png_bytes(c)) for c in crops])
    cand_vecs = np.stack([provider.embed(p.read_bytes()) for p in cand_paths])
    scores = score_candidates(cand_vecs, frame_vecs)
    selected = select_reference(scores)
    return {
        "scores": [float(s) for s in scores],
        "selected": selected,
        "provider": provider.name,
        "candidates": [p.name for p in cand_paths],
        "frames_used": len(crops),
        "degenerate": [
            int(i) for i, v in enumerate(cand_vecs) if is_degenerate(v)
        ],
    }


def write_selection(result: dict, out_path) -> None:
    Path(out_path).write_text(json.dumps(result, indent=2), encoding="utf-8")
