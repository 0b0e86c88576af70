"""Hyperparameter and ODE-parameter training: Adam on the per-datapoint
negative marginal log likelihood, with central finite-difference gradients
on the raw (untransformed) parameters.

Gradients are finite differences rather than analytic kernel derivatives:
parameter counts stay below ten and Gram matrices below ~125x125, so the
extra Cholesky factorizations are cheap, and grad_check guards accuracy.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .errors import DivergedError
from .gp import (
    Dataset,
    GramEvaluator,
    LodeGPModel,
    neg_mll,
    transform,
)
from .kernelalg import CompiledKernel, RefactorizeKernel, compile_lodegp

__all__ = [
    "TrainConfig",
    "TrainResult",
    "transform",
    "fit",
    "grad_check",
    "adam_minimize",
]


@dataclass(frozen=True)
class TrainConfig:
    iters: int = 300
    lr: float = 0.1
    seed: int = 0
    init_range: tuple = (-3.0, 3.0)
    grad_step: float = 1e-6
    adam_betas: tuple = (0.9, 0.999)
    adam_eps: float = 1e-8
    mode: str = "symbolic"

    def __post_init__(self):
        if self.iters <= 0:
            raise ValueError("iters must be positive")
        if self.lr <= 0:
            raise ValueError("lr must be positive")
        if self.init_range[0] >= self.init_range[1]:
            raise ValueError("init_range must satisfy lo < hi")


@dataclass(frozen=True)
class TrainResult:
    model: LodeGPModel
    loss_trace: list
    final_params: dict  # symbol -> (raw, transformed)


def _resolve_kernel(spec, mode):
    """Kernel plus the per-parameter training initial guesses."""
    if isinstance(spec, (CompiledKernel, RefactorizeKernel)):
        return spec, {s: 1.0 for s in spec.param_symbols}
    kernel = compile_lodegp(spec, mode=mode)
    init = dict(getattr(spec, "param_init", {}) or {})
    return kernel, {s: init.get(s, 1.0) for s in kernel.param_symbols}


class _Objective:
    """neg_mll as a function of the raw parameter vector.

    Vector layout: kernel hyper slots in declaration order, then the raw
    noise, then the ODE parameters in symbol order.
    """

    def __init__(self, kernel, data: Dataset, param_init: dict):
        self.kernel = kernel
        self.data = data
        self.slots = list(kernel.hyper_slots)
        self.param_symbols = list(kernel.param_symbols)
        self.param_init = param_init
        self.names = [s for s, _ in self.slots] + ["noise"] + self.param_symbols
        self.kinds = [k for _, k in self.slots] + ["noise"] + [
            "odeparam" for _ in self.param_symbols
        ]
        self._evaluators = {}

    def size(self) -> int:
        return len(self.names)

    def initial_vector(self, rng, init_range) -> np.ndarray:
        lo, hi = init_range
        vec = np.zeros(self.size())
        for i in range(len(self.slots)):
            vec[i] = rng.uniform(lo, hi)
        vec[len(self.slots)] = 0.0
        for k, sym in enumerate(self.param_symbols):
            vec[len(self.slots) + 1 + k] = float(self.param_init.get(sym, 1.0))
        return vec

    def model(self, vec: np.ndarray) -> LodeGPModel:
        ns = len(self.slots)
        raw_hypers = {self.slots[i][0]: float(vec[i]) for i in range(ns)}
        ode_params = {
            sym: float(vec[ns + 1 + k]) for k, sym in enumerate(self.param_symbols)
        }
        return LodeGPModel(
            kernel=self.kernel,
            raw_hypers=raw_hypers,
            ode_params=ode_params,
            noise_raw=float(vec[ns]),
        )

    def loss(self, vec: np.ndarray) -> float:
        model = self.model(vec)
        compiled, _ = model.resolved()
        evaluator = self._evaluators.get(id(compiled))
        if evaluator is None:
            evaluator = GramEvaluator(compiled, self.data.times)
            if len(self._evaluators) > 64:
                self._evaluators.clear()
            self._evaluators[id(compiled)] = evaluator
        return neg_mll(model, self.data, evaluator=evaluator)

    def gradient(self, vec: np.ndarray, step: float) -> np.ndarray:
        g = np.zeros_like(vec)
        for i in range(vec.size):
            up = vec.copy()
            up[i] += step
            dn = vec.copy()
            dn[i] -= step
            g[i] = (self.loss(up) - self.loss(dn)) / (2.0 * step)
        return g


def adam_minimize(loss_fn, grad_fn, x0: np.ndarray, config: TrainConfig):
    """Plain Adam with bias correction; returns (x, loss_trace)."""
    b1, b2 = config.adam_betas
    eps = config.adam_eps
    x = np.array(x0, dtype=float)
    m = np.zeros_like(x)
    v = np.zeros_like(x)
    trace = []
    for t in range(1, config.iters + 1):
        loss = loss_fn(x)
        trace.append(float(loss))
        if not math.isfinite(loss):
            raise DivergedError(f"non-finite loss at iteration {t}", trace)
        g = grad_fn(x)
        if not np.all(np.isfinite(g)):
            raise DivergedError(f"non-finite gradient at iteration {t}", trace)
        m = b1 * m + (1.0 - b1) * g
        v = b2 * v + (1.0 - b2) * g * g
        mh = m / (1.0 - b1**t)
        vh = v / (1.0 - b2**t)
        x = x - config.lr * mh / (np.sqrt(vh) + eps)
    return x, trace


def fit(spec, data: Dataset, config: TrainConfig | None = None) -> TrainResult:
    """Train on the per-datapoint negative marginal log likelihood.

    Signal variances and lengthscales initialize uniformly from the raw
    init range, the raw noise at 0, and ODE parameters at their declared
    initial guesses (default 1.0).
    """
    config = config or TrainConfig()
    kernel, param_init = _resolve_kernel(spec, config.mode)
    objective = _Objective(kernel, data, param_init)
    rng = np.random.default_rng(config.seed)
    x0 = objective.initial_vector(rng, config.init_range)
    x, trace = adam_minimize(
        objective.loss,
        lambda vec: objective.gradient(vec, config.grad_step),
        x0,
        config,
    )
    model = objective.model(x)
    final = {}
    for name, kind, raw in zip(objective.names, objective.kinds, x):
        final[name] = (float(raw), transform(float(raw), kind))
    return TrainResult(model=model, loss_trace=trace, final_params=final)


@dataclass(frozen=True)
class GradCheckEntry:
    name: str
    kind: str
    estimates: dict  # step -> gradient estimate
    richardson: tuple
    status: str  # "ok" | "negligible" | "at-bound" | "inconsistent"


@dataclass(frozen=True)
class GradCheckReport:
    entries: list

    @property
    def passed(self) -> bool:
        return all(e.status != "inconsistent" for e in self.entries)

    def flagged(self) -> list:
        return [e for e in self.entries if e.status in ("inconsistent", "at-bound")]


def grad_check(spec, data: Dataset, model: LodeGPModel, steps=(1e-4, 1e-6, 1e-8)) -> GradCheckReport:
    """Cross-check finite-difference gradients across step sizes.

    Two Richardson extrapolations (from the first and last step pairs) must
    agree within 1% relative, unless the gradient is negligible or the noise
    sits at its floor.
    """
    kernel = model.kernel
    objective = _Objective(kernel, data, dict(model.ode_params))
    ns = len(objective.slots)
    vec = np.zeros(objective.size())
    for i, (sym, _) in enumerate(objective.slots):
        vec[i] = model.raw_hypers[sym]
    vec[ns] = model.noise_raw
    for k, sym in enumerate(objective.param_symbols):
        vec[ns + 1 + k] = model.ode_params[sym]

    grads = {h: objective.gradient(vec, h) for h in steps}
    loss0 = objective.loss(vec)
    entries = []
    for i, (name, kind) in enumerate(zip(objective.names, objective.kinds)):
        g = {h: float(grads[h][i]) for h in steps}
        h1, h2, h3 = steps
        # central differences have O(h^2) error, so Richardson combines
        # pairs with weights h^2 / (h_a^2 - h_b^2)
        r1 = (h1**2 * g[h2] - h2**2 * g[h1]) / (h1**2 - h2**2)
        r2 = (h2**2 * g[h3] - h3**2 * g[h2]) / (h2**2 - h3**2)
        scale = max(abs(r1), abs(r2))
        if kind == "noise" and transform(vec[i], "noise") - 1e-10 < 1e-12:
            status = "at-bound"
        elif scale < 1e-6 * (1.0 + abs(loss0)):
            status = "negligible"
        elif abs(r1 - r2) > 0.01 * scale:
            status = "inconsistent"
        else:
            status = "ok"
        entries.append(
            GradCheckEntry(name=name, kind=kind, estimates=g, richardson=(r1, r2), status=status)
        )
    return GradCheckReport(entries=entries)
