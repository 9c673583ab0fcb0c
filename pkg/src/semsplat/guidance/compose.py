"""Region-wise score composition and the distillation gradients.

compose_scores stitches each subprompt's noise prediction into one field
using the pooled masks. Because the dilated masks may overlap near region
boundaries, overlapping cells average the covering predictions (which
reduces to the plain masked sum whenever the masks partition the grid and
stays exact when the covering predictions agree); cells no mask covers
fall back to the scene-level prompt.
"""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from semsplat.errors import InvalidParameterError
from semsplat.guidance.schedule import NoiseSchedule, add_noise


@dataclass
class SubpromptScore:
    entry: tuple  # (k, l, text)
    view_descriptor: str


@dataclass
class ComposedScore:
    epsilon: np.ndarray
    masks_used: list  # [(k, l, text)] with a nonempty mask
    oracle_calls: int


def compose_scores(x_t, subprompts, masks, oracle, t, view_descriptors=None,
                   null_prompt=None, null_mask=None) -> ComposedScore:
    """epsilon_hat = sum_{k,l} predict(x_t; y_{k,l} (+) view_k, t) * M_{k,l},
    normalized cell-wise by mask coverage.

    subprompts: [(k, l, text)]; masks: (m, h, w) binary, aligned with
    subprompts; view_descriptors: optional dict k -> descriptor text.
    Subprompts whose mask is empty are skipped without an oracle call.
    """
    x_t = np.asarray(x_t, dtype=np.float64)
    masks = np.asarray(masks)
    if masks.ndim != 3 or len(subprompts) != masks.shape[0]:
        raise InvalidParameterError("need one mask per subprompt")
    if masks.shape[1:] != x_t.shape[:2]:
        raise InvalidParameterError(
            f"mask grid {masks.shape[1:]} does not match x_t {x_t.shape[:2]}"
        )
    view_descriptors = view_descriptors or {}

    # Background cells belong to the scene-level prompt exclusively: the
    # null mask overrides any subprompt mask dilated across the silhouette.
    exclude = None
    if null_mask is not None:
        exclude = np.asarray(null_mask) > 0

    total = np.zeros_like(x_t)
    coverage = np.zeros(x_t.shape[:2])
    used = []
    calls = 0
    for (k, l, text), mask in zip(subprompts, masks):
        if exclude is not None:
            mask = np.where(exclude, 0, mask)
        if not mask.any():
            continue
        descriptor = view_descriptors.get(k, "")
        pred = oracle.predict_noise(x_t, text, descriptor, t)
        calls += 1
        total += pred * mask[:, :, None]
        coverage += mask
        used.append((k, l, text))

    uncovered = coverage == 0
    if uncovered.any():
        if null_prompt is None:
            raise InvalidParameterError(
                "cells without any mask need a scene-level null prompt"
            )
        pred = oracle.predict_noise(x_t, null_prompt, "", t)
        calls += 1
        total += pred * uncovered[:, :, None]
        coverage += uncovered

    epsilon = total / coverage[:, :, None]
    return ComposedScore(epsilon=epsilon, masks_used=used, oracle_calls=calls)


@dataclass
class ScoreGradient:
    grad: np.ndarray  # dL/dx, same shape as the rendered input
    residual_norm: float  # |epsilon_hat - epsilon| RMS, a loss proxy
    oracle_calls: int
    timestep: int


def semantic_sds_grad(x, subprompts, masks, oracle, schedule: NoiseSchedule, t,
                      epsilon, view_descriptors=None, null_prompt=None,
                      null_mask=None) -> ScoreGradient:
    """dL/dx = w(t) * (epsilon_hat(x_t) - epsilon), x_t = add_noise(x, t, eps)."""
    x = np.asarray(x, dtype=np.float64)
    x_t = add_noise(x, t, epsilon, schedule)
    composed = compose_scores(
        x_t, subprompts, masks, oracle, t, view_descriptors=view_descriptors,
        null_prompt=null_prompt, null_mask=null_mask,
    )
    residual = composed.epsilon - epsilon
    grad = schedule.weight(t) * residual
    return ScoreGradient(
        grad=grad,
        residual_norm=float(np.sqrt(np.mean(residual**2))),
        oracle_calls=composed.oracle_calls,
        timestep=t,
    )


def plain_sds_grad(x, prompt, oracle, schedule: NoiseSchedule, t, epsilon,
                   view_descriptor="") -> ScoreGradient:
    """Single-prompt distillation: the one-subprompt, all-ones-mask case."""
    x = np.asarray(x, dtype=np.float64)
    mask = np.ones((1,) + x.shape[:2], dtype=np.uint8)
    return semantic_sds_grad(
        x, [(0, 0, prompt)], mask, oracle, schedule, t, epsilon,
        view_descriptors={0: view_descriptor},
    )
