"""From rendered feature maps to per-subprompt masks.

Pipeline: decode_map lifts the rendered d_f-dim feature image back to the
d_h-dim embedding space; probabilities scores every pixel against every
subprompt embedding with a temperature softmax over cosine similarities;
masks takes the per-pixel argmax (a partition); pool_masks downsamples to
the denoising grid with stride-matched average pooling, binarizes at any
coverage, then dilates with a 5x5 max pool so edge pixels keep their region.
"""
from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from semsplat.errors import InvalidParameterError

BACKGROUND_ALPHA = 0.05
MAXPOOL_KERNEL = 5


def decode_map(feature_map, codec):
    """Per-pixel decoder application: S(v) = D(F(v))."""
    f = np.asarray(feature_map)
    if f.ndim != 3 or f.shape[2] != codec.d_f:
        raise InvalidParameterError(
            f"feature map has shape {f.shape}, expected (H, W, {codec.d_f})"
        )
    if not np.all(np.isfinite(f)):
        raise InvalidParameterError("feature map contains non-finite values")
    h, w, _ = f.shape
    decoded = codec.decode(f.reshape(h * w, codec.d_f))
    return np.asarray(decoded).reshape(h, w, codec.d_h)


@dataclass
class SubpromptSet:
    """Ordered (object k, region l, text) triples with unit embeddings."""

    entries: list  # [(k, l, text), ...]
    embeddings: np.ndarray  # (m, d_h), unit rows
    tau: float = 0.01

    def __post_init__(self):
        if self.tau <= 0:
            raise InvalidParameterError("temperature must be positive")
        if len({(k, l) for k, l, _ in self.entries}) != len(self.entries):
            raise InvalidParameterError("duplicate (k, l) pair in subprompt set")
        self.embeddings = np.asarray(self.embeddings, dtype=np.float64)
        norms = np.linalg.norm(self.embeddings, axis=1, keepdims=True)
        if np.any(norms == 0):
            raise InvalidParameterError("zero subprompt embedding")
        self.embeddings = self.embeddings / norms

    def __len__(self):
        return len(self.entries)

    @classmethod
    def from_texts(cls, triples, provider, tau=0.01):
        embeddings = np.stack([provider.encode(text) for _, _, text in triples])
        return cls(entries=list(triples), embeddings=embeddings, tau=tau)


def probabilities(semantic_map, prompts: SubpromptSet):
    """p(k,l | v) = softmax over subprompts of cos(q_{k,l}, S(v)) / tau."""
    if len(prompts) == 0:
        raise InvalidParameterError("empty subprompt set")
    s = np.asarray(semantic_map)
    h, w, d_h = s.shape
    if d_h != prompts.embeddings.shape[1]:
        raise InvalidParameterError("semantic map / prompt dimension mismatch")
    flat = s.reshape(h * w, d_h)
    norms = np.linalg.norm(flat, axis=1, keepdims=True)
    safe = np.where(norms > 0, norms, 1.0)
    cos = (flat / safe) @ prompts.embeddings.T  # (P, m)
    logits = cos / prompts.tau
    logits -= logits.max(axis=1, keepdims=True)
    p = np.exp(logits)
    p /= p.sum(axis=1, keepdims=True)
    return p.reshape(h, w, len(prompts))


@dataclass
class MaskSet:
    """Binary masks per subprompt, plus the optional background (null) mask
    and the pooled masks at the denoising grid."""

    entries: list
    masks: np.ndarray  # (m, H, W) in {0, 1}
    null_mask: np.ndarray | None = None  # (H, W)
    pooled: np.ndarray | None = field(default=None)  # (m, h, w)
    pooled_null: np.ndarray | None = None

    @property
    def shape(self):
        return self.masks.shape[1:]

    def partition_ok(self):
        total = self.masks.sum(axis=0)
        if self.null_mask is not None:
            total = total + self.null_mask
        return bool(np.all(total == 1))


def masks(probability_map, entries=None) -> MaskSet:
    """Argmax masks; ties resolve to the lowest (k, l) index."""
    p = np.asarray(probability_map)
    h, w, m = p.shape
    winner = np.argmax(p, axis=2)  # first maximum wins on ties
    out = np.zeros((m, h, w), dtype=np.uint8)
    for j in range(m):
        out[j] = winner == j
    if entries is None:
        entries = [(0, j, f"subprompt-{j}") for j in range(m)]
    return MaskSet(entries=list(entries), masks=out)


def apply_background(maskset: MaskSet, alpha_map, threshold=BACKGROUND_ALPHA) -> MaskSet:
    """Reassign low-coverage pixels to a reserved null mask."""
    alpha = np.asarray(alpha_map)
    if alpha.shape != maskset.shape:
        raise InvalidParameterError("alpha map shape mismatch")
    background = (alpha < threshold).astype(np.uint8)
    masked = maskset.masks * (1 - background)[None, :, :]
    return MaskSet(entries=maskset.entries, masks=masked, null_mask=background)


def _avg_pool_binarize(mask, out_h, out_w):
    h, w = mask.shape
    if h % out_h or w % out_w:
        raise InvalidParameterError(
            f"mask size {(h, w)} not divisible by latent grid {(out_h, out_w)}"
        )
    sy, sx = h // out_h, w // out_w
    pooled = mask.reshape(out_h, sy, out_w, sx).mean(axis=(1, 3))
    return (pooled > 0).astype(np.uint8)


def _max_pool_same(mask, kernel=MAXPOOL_KERNEL):
    pad = kernel // 2
    padded = np.zeros((mask.shape[0] + 2 * pad, mask.shape[1] + 2 * pad), dtype=mask.dtype)
    padded[pad:-pad, pad:-pad] = mask
    windows = np.lib.stride_tricks.sliding_window_view(padded, (kernel, kernel))
    return windows.max(axis=(2, 3))


def _avg_pool(mask, out_h, out_w):
    h, w = mask.shape
    if h % out_h or w % out_w:
        raise InvalidParameterError(
            f"mask size {(h, w)} not divisible by latent grid {(out_h, out_w)}"
        )
    sy, sx = h // out_h, w // out_w
    return mask.reshape(out_h, sy, out_w, sx).mean(axis=(1, 3))


def pool_masks(maskset: MaskSet, latent_hw) -> MaskSet:
    """Average-pool (kernel == stride) to the latent grid, binarize at any
    coverage, then dilate with a same-size 5x5 max pool.

    The background (null) mask pools differently: by majority coverage and
    without dilation. Background cells are excluded from every subprompt
    mask, so dilation never leaks object scores onto empty background; the
    null mask wins those cells outright at score composition.
    """
    out_h, out_w = latent_hw
    pooled = np.stack(
        [_max_pool_same(_avg_pool_binarize(m, out_h, out_w)) for m in maskset.masks]
    )
    pooled_null = None
    if maskset.null_mask is not None:
        pooled_null = (_avg_pool(maskset.null_mask, out_h, out_w) > 0.5).astype(np.uint8)
    return MaskSet(
        entries=maskset.entries,
        masks=maskset.masks,
        null_mask=maskset.null_mask,
        pooled=pooled,
        pooled_null=pooled_null,
    )
