"""Central-difference gradient checking for scalar losses."""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Callable, Iterable

import numpy as np

from .tensor import NonFiniteError, Tensor

# Relative error uses a floored denominator so that pure float noise on
# near-zero gradients does not register as disagreement.
_DENOM_FLOOR = 1e-3


@dataclass
class GradCheckReport:
    eps: float
    tol: float
    per_param: dict[str, float] = field(default_factory=dict)
    worst_param: str = ""
    worst_index: int = -1
    worst_analytic: float = 0.0
    worst_numeric: float = 0.0

    @property
    def max_rel_err(self) -> float:
        return max(self.per_param.values()) if self.per_param else 0.0

    @property
    def passed(self) -> bool:
        return self.max_rel_err < self.tol

    def summary(self) -> str:
        status = "OK" if self.passed else "FAIL"
        return (
            f"grad_check {status}: max rel err {self.max_rel_err:.3e} (tol {self.tol:.1e}) "
            f"at {self.worst_param}[{self.worst_index}] "
            f"analytic={self.worst_analytic:.6e} numeric={self.worst_numeric:.6e}"
        )


def grad_check(
    f: Callable[[], Tensor],
    params: Iterable[tuple[str, Tensor]],
    eps: float = 1e-5,
    tol: float = 1e-4,
    max_entries_per_param: int | None = None,
    rng: np.random.Generator | None = None,
) -> GradCheckReport:
    """Compare analytic gradients of f() against central differences.

    f must be a deterministic closure re-evaluating the scalar loss from the
    current parameter values. When max_entries_per_param is set, a seeded
    subsample of flat indices is perturbed per parameter instead of all of
    them.
    """
    if not (0 < eps <= 1e-2):
        raise ValueError(f"eps must be in (0, 1e-2], got {eps}")
    named = list(params)
    for _, t in named:
        t.grad = None
    loss = f()
    if not np.all(np.isfinite(loss.data)):
        raise NonFiniteError("grad_check: loss is not finite")
    loss.backward()
    analytic = {
        name: (t.grad.copy() if t.grad is not None else np.zeros_like(t.data))
        for name, t in named
    }

    report = GradCheckReport(eps=eps, tol=tol)
    global_worst = -1.0
    for name, t in named:
        flat = t.data.reshape(-1)
        n = flat.size
        if max_entries_per_param is not None and n > max_entries_per_param:
            if rng is None:
                rng = np.random.default_rng(0)
            indices = rng.choice(n, size=max_entries_per_param, replace=False)
        else:
            indices = np.arange(n)
        worst = 0.0
        a_flat = analytic[name].reshape(-1)
        for i in indices:
            orig = flat[i]
            flat[i] = orig + eps
            f_plus = float(f().data.reshape(()))
            flat[i] = orig - eps
            f_minus = float(f().data.reshape(()))
            flat[i] = orig
            numeric = (f_plus - f_minus) / (2.0 * eps)
            a = float(a_flat[i])
            rel = abs(a - numeric) / max(abs(a), abs(numeric), _DENOM_FLOOR)
            if rel > worst:
                worst = rel
            if rel > global_worst:
                global_worst = rel
                report.worst_param = name
                report.worst_index = int(i)
                report.worst_analytic = a
                report.worst_numeric = numeric
        report.per_param[name] = worst
    return report
