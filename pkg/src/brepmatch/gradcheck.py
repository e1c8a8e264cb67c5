"""Reverse-mode gradients vs. central finite differences on the training loss."""

from __future__ import annotations

import numpy as np
import torch

from .matching import Matching
from .reference import params_as, ref_loss
from .scorer import ModelParams
from .training import TrainItem, total_loss


def loss_and_grads(params: ModelParams, item: TrainItem, prior: Matching, w: float) -> tuple[float, dict[str, torch.Tensor]]:
    work = params.copy()
    for t in work.tensors.values():
        t.requires_grad_(True)
    value = total_loss(work, item, prior, w)
    value.backward()
    grads = {n: (t.grad if t.grad is not None else torch.zeros_like(t)).detach().clone() for n, t in work.tensors.items()}
    return float(value.detach()), grads


def pick_coordinates(params: ModelParams, n: int, seed: int) -> list[tuple[str, int]]:
    """One coordinate from every tensor, the rest uniformly over all parameters."""
    rng = np.random.default_rng(seed)
    names = list(params.tensors)
    sizes = np.array([params.tensors[k].numel() for k in names])
    picked = [(k, int(rng.integers(params.tensors[k].numel()))) for k in names]
    flat = rng.choice(int(sizes.sum()), size=max(0, n - len(picked)), replace=False)
    bounds = np.cumsum(sizes)
    for f in np.sort(flat):
        t = int(np.searchsorted(bounds, f, side="right"))
        start = bounds[t - 1] if t else 0
        picked.append((names[t], int(f - start)))
    return picked


def grad_check(
    params: ModelParams,
    item: TrainItem,
    prior: Matching,
    epsilon: float = 1e-5,
    n_coords: int = 200,
    w: float = 2.0,
    seed: int = 0,
    details: list | None = None,
    fd_dtype=np.longdouble,
) -> float:
    """Max over sampled coordinates of |g_ad - g_fd| / max(1e-8, |g_ad| + |g_fd|).

    Reverse-mode gradients come from the float64 torch model. Central
    differences use the independent numpy forward in ``fd_dtype``; in plain
    float64 the loss round-off (~1e-16) divided by 2*epsilon is comparable to
    the smallest true gradients.
    """
    _, grads = loss_and_grads(params, item, prior, w)
    P = params_as(params, fd_dtype)
    eps = fd_dtype(epsilon)
    worst = 0.0
    for name, idx in pick_coordinates(params, n_coords, seed):
        flat = P[name].reshape(-1)
        keep = flat[idx]
        flat[idx] = keep + eps
        up = ref_loss(params, item, prior, w, P, fd_dtype)
        flat[idx] = keep - eps
        down = ref_loss(params, item, prior, w, P, fd_dtype)
        flat[idx] = keep
        g_fd = float((up - down) / (2 * eps))
        g_ad = float(grads[name].view(-1)[idx])
        rel = abs(g_ad - g_fd) / max(1e-8, abs(g_ad) + abs(g_fd))
        if details is not None:
            details.append({"name": name, "index": idx, "ad": g_ad, "fd": g_fd, "rel": rel})
        worst = max(worst, rel)
    return worst
