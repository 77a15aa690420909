"""Adam with per-group learning rates over nested {group: {name: tensor}} params."""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np
import torch


class OptimizerError(ValueError):
    pass


@dataclass(frozen=True)
class AdamHyper:
    beta1: float = 0.9
    beta2: float = 0.999
    eps: float = 1e-8


@dataclass
class AdamState:
    """First/second moment accumulators mirroring the parameter structure."""

    m: dict[str, dict[str, torch.Tensor]]
    v: dict[str, dict[str, torch.Tensor]]
    step: int = 0

    @staticmethod
    def initial(params: dict[str, dict[str, torch.Tensor]]) -> "AdamState":
        zeros = lambda g: {k: torch.zeros_like(t) for k, t in g.items()}
        return AdamState(
            m={g: zeros(p) for g, p in params.items()},
            v={g: zeros(p) for g, p in params.items()},
            step=0,
        )

    def to_numpy(self) -> dict:
        out = {}
        for g in sorted(self.m):
            for k in sorted(self.m[g]):
                out[f"{g}.{k}.m"] = self.m[g][k].detach().cpu().numpy().copy()
                out[f"{g}.{k}.v"] = self.v[g][k].detach().cpu().numpy().copy()
        return out

    @staticmethod
    def from_numpy(arrays: dict, step: int) -> "AdamState":
        m: dict = {}
        v: dict = {}
        for key, arr in arrays.items():
            base, kind = key.rsplit(".", 1)
            group, name = base.split(".", 1)
            dst = m if kind == "m" else v
            dst.setdefault(group, {})[name] = torch.from_numpy(arr.copy())
        return AdamState(m=m, v=v, step=step)


def adam_step(
    params: dict[str, dict[str, torch.Tensor]],
    grads: dict[str, dict[str, torch.Tensor]],
    state: AdamState,
    lr: dict[str, float],
    hyper: AdamHyper = AdamHyper(),
) -> tuple[dict[str, dict[str, torch.Tensor]], AdamState]:
    """One Adam update with bias correction.

    Updates tensors in place (the training loop owns them exclusively) and
    returns the same containers for functional-style call sites. Groups with a
    missing gradient entry are skipped. Raises OptimizerError naming the group
    on any non-finite gradient.
    """
    step = state.step + 1
    b1, b2, eps = hyper.beta1, hyper.beta2, hyper.eps
    bc1 = 1.0 - b1 ** step
    bc2 = 1.0 - b2 ** step
    with torch.no_grad():
        for group in sorted(params):
            if group not in grads:
                continue
            if group not in lr:
                raise OptimizerError(f"no learning rate for group {group!r}")
            glr = lr[group]
            for name in sorted(params[group]):
                g = grads[group].get(name)
                if g is None:
                    continue
                if not torch.isfinite(g).all():
                    raise OptimizerError(
                        f"non-finite gradient in group {group!r}, parameter {name!r}")
                p = params[group][name]
                m = state.m[group][name]
                v = state.v[group][name]
                m.mul_(b1).add_(g, alpha=1.0 - b1)
                v.mul_(b2).addcmul_(g, g, value=1.0 - b2)
                m_hat = m / bc1
                v_hat = v / bc2
                p.sub_(glr * m_hat / (torch.sqrt(v_hat) + eps))
    state.step = step
    return params, state


def cosine_lr_factor(step: int, total: int, floor: float = 0.1) -> float:
    """Cosine decay from 1.0 at step 0 to `floor` at step `total`."""
    if total <= 0:
        return 1.0
    s = min(max(step, 0), total)
    return floor + (1.0 - floor) * 0.5 * (1.0 + np.cos(np.pi * s / total))
