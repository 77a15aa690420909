"""Central finite-difference gradient checking for float64 loss closures."""

from __future__ import annotations

from dataclasses import dataclass, field

import torch


@dataclass
class GradCheckReport:
    tolerance: float
    h: float
    max_rel_err: dict[str, float] = field(default_factory=dict)
    worst: dict[str, tuple[str, int, float, float]] = field(default_factory=dict)

    @property
    def failing_groups(self) -> list[str]:
        return sorted(g for g, e in self.max_rel_err.items() if e > self.tolerance)

    @property
    def passed(self) -> bool:
        return not self.failing_groups

    def summary(self) -> str:
        lines = []
        for g in sorted(self.max_rel_err):
            status = "ok" if self.max_rel_err[g] <= self.tolerance else "FAIL"
            lines.append(f"{g}: max rel err {self.max_rel_err[g]:.3e} [{status}]")
        return "\n".join(lines)


def _rel_err(ga: float, gfd: float) -> float:
    return abs(ga - gfd) / max(abs(ga), abs(gfd), 1e-8)


def grad_check(
    fn,
    params: dict[str, dict[str, torch.Tensor]],
    h: float = 1e-5,
    tolerance: float = 1e-4,
) -> GradCheckReport:
    """Compare autograd gradients of `fn(params)` against central differences.

    `params` is {group: {name: float64 tensor}}; every tensor is checked
    element by element, so keep instances micro-sized. The analytic side is a
    single backward pass; the finite-difference side re-evaluates `fn` twice
    per element with the tensor perturbed in place under no_grad.
    """
    for group in params.values():
        for t in group.values():
            if t.dtype != torch.float64:
                raise ValueError("grad_check requires float64 parameters")
            t.requires_grad_(True)
            t.grad = None

    loss = fn(params)
    loss.backward()

    report = GradCheckReport(tolerance=tolerance, h=h)
    for gname, group in params.items():
        g_max = 0.0
        g_worst = ("", -1, 0.0, 0.0)
        for pname, t in group.items():
            analytic = (t.grad if t.grad is not None else torch.zeros_like(t)).reshape(-1)
            flat = t.reshape(-1)
            for i in range(flat.numel()):
                orig = flat[i].item()
                with torch.no_grad():
                    flat[i] = orig + h
                    f_plus = float(fn(params))
                    flat[i] = orig - h
                    f_minus = float(fn(params))
                    flat[i] = orig
                gfd = (f_plus - f_minus) / (2.0 * h)
                err = _rel_err(float(analytic[i]), gfd)
                if err > g_max:
                    g_max = err
                    g_worst = (pname, i, float(analytic[i]), gfd)
        report.max_rel_err[gname] = g_max
        report.worst[gname] = g_worst
    return report
