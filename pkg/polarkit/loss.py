"""
Regression objectives on ray vectors.

 - polar IoU: sum(min(d, d*)) / sum(max(d, d*)), a closed-form stand-in for
   the mask IoU of two polar masks sharing a center
 - polar IoU loss: log(sum max / sum min) = -log(polar IoU), with its
   analytic (sub)gradient
 - squared polar IoU: the discrete polar-integral mask IoU (areas scale with
   d^2, the uniform angle step cancels)
 - smooth-L1: the per-ray baseline the IoU loss is compared against

Every ray is clamped below at EPSILON before evaluation.
"""

from dataclasses import dataclass
from functools import partial
from typing import Callable, List, Sequence, Tuple

import numpy as np

from . import EPSILON
from .errors import InvalidRayPair

RAY_MAX = 1e6
DEFAULT_BETA = 1.0
TABLE_ALPHAS = (0.05, 0.30, 1.00)
ADAPT_UP = 1.2
ADAPT_DOWN = 0.5
ADAPT_MAX = 1.0


@dataclass(frozen=True, eq=False)
class RayPair:
    target: np.ndarray
    predicted: np.ndarray

    def __post_init__(self):
        t = np.array(self.target, dtype=np.float64).reshape(-1)
        p = np.array(self.predicted, dtype=np.float64).reshape(-1)
        if len(t) != len(p):
            raise InvalidRayPair(f"target has {len(t)} rays, prediction has {len(p)}")
        if len(t) < 4:
            raise InvalidRayPair(f"need at least 4 rays, got {len(t)}")
        if not (np.all(np.isfinite(t)) and np.all(np.isfinite(p))):
            raise InvalidRayPair("ray lengths must be finite")
        if np.any(t < 0.0) or np.any(p < 0.0):
            raise InvalidRayPair("ray lengths must be non-negative")
        t = np.maximum(t, EPSILON)
        p = np.maximum(p, EPSILON)
        t.flags.writeable = False
        p.flags.writeable = False
        object.__setattr__(self, "target", t)
        object.__setattr__(self, "predicted", p)

    @property
    def n(self) -> int:
        return len(self.target)


@dataclass(frozen=True, eq=False)
class LossValueGrad:
    value: float
    grad: np.ndarray


Objective = Callable[[RayPair], LossValueGrad]


def polar_iou(rp: RayPair) -> float:
    lo = np.minimum(rp.target, rp.predicted).sum()
    hi = np.maximum(rp.target, rp.predicted).sum()
    return float(lo / hi)


def batch_polar_iou(targets, predictions) -> np.ndarray:
    """Polar IoU of every row pair of two (B, n) arrays."""
    t = np.maximum(np.asarray(targets, dtype=np.float64), EPSILON)
    p = np.maximum(np.asarray(predictions, dtype=np.float64), EPSILON)
    if t.shape != p.shape or t.ndim != 2:
        raise InvalidRayPair(f"expected two equal (B, n) arrays, got {t.shape} and {p.shape}")
    return np.minimum(t, p).sum(axis=1) / np.maximum(t, p).sum(axis=1)


def polar_iou_loss(rp: RayPair) -> LossValueGrad:
    """-log(polar IoU) and its gradient w.r.t. the predicted rays.

    An over-predicted ray only appears in the max sum, an under-predicted one
    only in the min sum. A tie takes the max-branch term 1/sum(max).
    """
    s_max = float(np.maximum(rp.target, rp.predicted).sum())
    s_min = float(np.minimum(rp.target, rp.predicted).sum())
    grad = np.where(rp.predicted < rp.target, -1.0 / s_min, 1.0 / s_max)
    return LossValueGrad(float(np.log(s_max / s_min)), grad)


def squared_polar_iou(rp: RayPair) -> float:
    lo = np.minimum(rp.target, rp.predicted)
    hi = np.maximum(rp.target, rp.predicted)
    return float(np.dot(lo, lo) / np.dot(hi, hi))


def smooth_l1_loss(rp: RayPair, beta: float = DEFAULT_BETA, alpha: float = 1.0) -> LossValueGrad:
    if not beta > 0:
        raise ValueError(f"beta must be > 0, got {beta}")
    if not alpha > 0:
        raise ValueError(f"alpha must be > 0, got {alpha}")
    r = rp.predicted - rp.target
    a = np.abs(r)
    quad = a < beta
    per_ray = np.where(quad, r * r / (2.0 * beta), a - beta / 2.0)
    grad = np.where(quad, r / beta, np.sign(r))
    return LossValueGrad(float(alpha * per_ray.sum()), alpha * grad)


def objectives(beta: float = DEFAULT_BETA, alphas: Sequence[float] = TABLE_ALPHAS) -> List[Tuple[str, Objective]]:
    """The polar IoU loss followed by one smooth-L1 objective per balance factor."""
    out: List[Tuple[str, Objective]] = [("polar_iou", polar_iou_loss)]
    for alpha in alphas:
        out.append((f"smooth_l1_a{alpha:.2f}", partial(smooth_l1_loss, beta=beta, alpha=float(alpha))))
    return out


@dataclass(frozen=True, eq=False)
class DescentTrace:
    losses: np.ndarray
    ious: np.ndarray
    rays: np.ndarray

    @property
    def final_iou(self) -> float:
        return float(self.ious[-1])


def descend(
    target: Sequence[float],
    start: Sequence[float],
    objective: Objective,
    lr: float,
    steps: int,
    adaptive: bool = False,
) -> DescentTrace:
    """Gradient descent on the predicted rays, parameterized as u = log(d*).

    The chain rule gives dL/du = d* * dL/dd*, which keeps rays positive and
    makes the polar IoU loss step independent of object scale. Rays stay in
    [EPSILON, RAY_MAX].

    With ``adaptive`` every ray keeps its own step, starting at ``lr``: it grows
    by ADAPT_UP while the gradient sign holds and shrinks by ADAPT_DOWN when the
    sign flips, and the ray moves by that step against the sign (resilient
    propagation). A fixed step keeps oscillating around the optimum of the
    polar IoU loss; the adaptive one settles.
    """
    if lr < 0:
        raise ValueError(f"step size must be >= 0, got {lr}")
    t = np.maximum(np.asarray(target, dtype=np.float64), EPSILON)
    lo, hi = np.log(EPSILON), np.log(RAY_MAX)
    u = np.clip(np.log(np.maximum(np.asarray(start, dtype=np.float64), EPSILON)), lo, hi)
    d = np.exp(u)

    rp = RayPair(t, d)
    ev = objective(rp)
    losses = [ev.value]
    ious = [polar_iou(rp)]
    step = np.full(len(u), float(lr))
    prev_sign = np.zeros(len(u))
    for _ in range(int(steps)):
        g = d * ev.grad
        if adaptive:
            sign = np.sign(g)
            turn = sign * prev_sign
            step = np.where(turn > 0, np.minimum(step * ADAPT_UP, ADAPT_MAX), step)
            step = np.where(turn < 0, step * ADAPT_DOWN, step)
            u = np.clip(u - step * sign, lo, hi)
            prev_sign = sign
        else:
            u = np.clip(u - lr * g, lo, hi)
        d = np.exp(u)
        rp = RayPair(t, d)
        ev = objective(rp)
        losses.append(ev.value)
        ious.append(polar_iou(rp))
    return DescentTrace(np.array(losses), np.array(ious), d)
