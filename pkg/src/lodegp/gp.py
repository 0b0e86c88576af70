"""Multi-output GP regression on a compiled kernel: Gram assembly, marginal
likelihood, posterior prediction, sampling, and channel marginalization.

Gram matrices use the time-major layout: row i*n + c holds time i, channel c.
Models are immutable value objects; every operation here is a pure function
of its inputs, so distinct models can be used concurrently.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, replace

import numpy as np

from .errors import (
    EmptySelectionError,
    NotPositiveDefiniteError,
    ShapeMismatchError,
    UnboundSymbolError,
)
from .kernelalg import (
    CompiledKernel,
    RefactorizeKernel,
    ell_symbol,
    to_rs_monomials,
)

NOISE_FLOOR = 1e-10


def transform(raw: float, kind: str) -> float:
    """Map a raw parameter to its constrained value.

    Lengthscales and variances go through exp; the noise variance through a
    softplus with a 1e-10 floor; ODE parameters are trained untransformed.
    """
    if kind in ("lengthscale", "variance"):
        return float(np.exp(raw))
    if kind == "noise":
        return float(np.logaddexp(0.0, raw)) + NOISE_FLOOR
    if kind == "odeparam":
        return float(raw)
    raise ValueError(f"unknown transform kind {kind!r}")


@dataclass(frozen=True)
class Dataset:
    times: np.ndarray
    values: np.ndarray  # N x n
    channels: tuple

    def __init__(self, times, values, channels):
        times = np.asarray(times, dtype=float)
        values = np.asarray(values, dtype=float)
        if values.ndim != 2 or values.shape[0] != times.shape[0]:
            raise ShapeMismatchError(
                f"values of shape {values.shape} do not match {times.shape[0]} times"
            )
        order = np.argsort(times, kind="stable")
        times = times[order]
        values = values[order]
        if times.size > 1 and np.any(np.diff(times) <= 0):
            raise ValueError("dataset times must be distinct")
        object.__setattr__(self, "times", times)
        object.__setattr__(self, "values", values)
        object.__setattr__(self, "channels", tuple(channels))

    def __len__(self):
        return self.times.shape[0]

    def select_channels(self, indices) -> "Dataset":
        return Dataset(self.times, self.values[:, list(indices)],
                       tuple(self.channels[i] for i in indices))


@dataclass(frozen=True)
class LodeGPModel:
    kernel: CompiledKernel | RefactorizeKernel
    raw_hypers: dict  # slot symbol -> raw value
    ode_params: dict  # param symbol -> value
    noise_raw: float

    def transformed_hypers(self) -> dict:
        kinds = dict(self.kernel.hyper_slots)
        out = {}
        for sym, raw in self.raw_hypers.items():
            out[sym] = transform(raw, kinds.get(sym, "variance"))
        return out

    def noise_variance(self) -> float:
        return transform(self.noise_raw, "noise")

    def resolved(self):
        """(compiled kernel, evaluation binding) with parameters applied."""
        for sym, _ in self.kernel.hyper_slots:
            if sym not in self.raw_hypers:
                raise UnboundSymbolError(f"hyperparameter slot {sym!r} is unbound")
        binding = self.transformed_hypers()
        if isinstance(self.kernel, RefactorizeKernel):
            for sym in self.kernel.param_symbols:
                if sym not in self.ode_params:
                    raise UnboundSymbolError(f"ODE parameter {sym!r} is unbound")
            return self.kernel.bind(self.ode_params), binding
        for sym in self.kernel.param_symbols:
            if sym not in self.ode_params:
                raise UnboundSymbolError(f"ODE parameter {sym!r} is unbound")
        binding.update({s: float(v) for s, v in self.ode_params.items()})
        return self.kernel, binding

    def with_raw(self, raw_hypers=None, ode_params=None, noise_raw=None) -> "LodeGPModel":
        return replace(
            self,
            raw_hypers=dict(raw_hypers if raw_hypers is not None else self.raw_hypers),
            ode_params=dict(ode_params if ode_params is not None else self.ode_params),
            noise_raw=self.noise_raw if noise_raw is None else float(noise_raw),
        )


@dataclass(frozen=True)
class Posterior:
    query_times: np.ndarray
    mean: np.ndarray  # M x n
    covariance: np.ndarray  # (M*n) x (M*n), time-major


class GramEvaluator:
    """Vectorized kernel evaluation on fixed time grids.

    Terms are grouped into components by (latent column, variance slot); a
    component's matrix depends only on its own lengthscale and the ODE
    parameters appearing in its coefficients, so repeated evaluations during
    finite-difference training mostly hit the per-component cache.

    Within a component, polynomial parts are re-expanded exactly into the
    variables r = t1 - t2 and s = t1 + t2 at construction time.  Terms that
    came from differentiating the squared exponential collapse to pure
    r-polynomials there, which avoids the catastrophic cancellation the raw
    t1^p t2^q monomials would suffer at large times.
    """

    def __init__(self, kernel: CompiledKernel, times_a, times_b=None):
        self.kernel = kernel
        self.n = kernel.dim
        self.ta = np.asarray(times_a, dtype=float)
        self.tb = self.ta if times_b is None else np.asarray(times_b, dtype=float)
        self.r = self.ta[:, None] - self.tb[None, :]
        self.s = self.ta[:, None] + self.tb[None, :]
        self.r2 = self.r**2
        self._pow_r = {0: 1.0, 1: self.r, 2: self.r2}
        self._pow_s = {0: 1.0, 1: self.s}
        self._exp = {}
        self._trig = {}
        self._comp_cache = {}

        comps = {}
        for i in range(self.n):
            for j in range(self.n):
                for t in kernel.entry(i, j).terms:
                    comps.setdefault((t.src, t.sigma), {}).setdefault(
                        (i, j, t.se, t.ea, t.eb, t.trig, t.freq, t.invp), []
                    ).append(t)
        self.components = []
        for key in sorted(comps, key=lambda k: (k[0], k[1] or "")):
            groups = []
            se_indices = set()
            param_syms = set()
            for gkey in sorted(comps[key]):
                i, j, se, ea, eb, trig, freq, invp = gkey
                if se >= 0:
                    se_indices.add(se)
                monos = to_rs_monomials(comps[key][gkey])
                for coef, _, _ in monos:
                    param_syms.update(coef.symbols)
                groups.append(
                    dict(i=i, j=j, se=se, ea=ea, eb=eb, trig=trig, freq=freq,
                         invp=invp, monos=monos)
                )
            self.components.append(
                dict(sigma=key[1], groups=groups,
                     se_indices=sorted(se_indices), params=sorted(param_syms))
            )

    def _pow(self, cache, base, k):
        arr = cache.get(k)
        if arr is None:
            arr = base**k
            cache[k] = arr
        return arr

    def _exp2d(self, ea, eb):
        key = (ea, eb)
        arr = self._exp.get(key)
        if arr is None:
            arr = np.exp(ea * self.ta)[:, None] * np.exp(eb * self.tb)[None, :]
            self._exp[key] = arr
        return arr

    def _trig2d(self, kind, freq):
        key = (kind, freq)
        arr = self._trig.get(key)
        if arr is None:
            arr = np.cos(freq * self.r) if kind == 1 else np.sin(freq * self.r)
            self._trig[key] = arr
        return arr

    def _build_component(self, comp, binding):
        na, nb, n = self.ta.size, self.tb.size, self.n
        out = np.zeros((na, n, nb, n))
        se_mats = {}
        ells = {}
        for se in comp["se_indices"]:
            name = ell_symbol(se)
            if name not in binding:
                raise UnboundSymbolError(f"symbol {name!r} is unbound")
            ell = float(binding[name])
            ells[se] = ell
            se_mats[se] = np.exp(self.r2 * (-0.5 / (ell * ell)))
        params = {s: binding[s] for s in comp["params"]}
        for g in comp["groups"]:
            scale = ells[g["se"]] ** (-2 * g["invp"]) if g["invp"] else 1.0
            poly = None
            for coef, ri, si in g["monos"]:
                c = coef.eval_float(params) * scale
                piece = c * self._pow(self._pow_r, self.r, ri)
                if si:
                    piece = piece * self._pow(self._pow_s, self.s, si)
                poly = piece if poly is None else poly + piece
            block = poly
            if g["ea"] != 0.0 or g["eb"] != 0.0:
                block = block * self._exp2d(g["ea"], g["eb"])
            if g["trig"]:
                block = block * self._trig2d(g["trig"], g["freq"])
            if g["se"] >= 0:
                block = block * se_mats[g["se"]]
            out[:, g["i"], :, g["j"]] += block
        return out

    def __call__(self, binding: dict) -> np.ndarray:
        na, nb, n = self.ta.size, self.tb.size, self.n
        total = np.zeros((na, n, nb, n))
        for idx, comp in enumerate(self.components):
            sigma = comp["sigma"]
            if sigma is not None:
                if sigma not in binding:
                    raise UnboundSymbolError(f"symbol {sigma!r} is unbound")
                scale = float(binding[sigma]) ** 2
            else:
                scale = 1.0
            state = tuple(float(binding[ell_symbol(se)]) for se in comp["se_indices"])
            for s in comp["params"]:
                if s not in binding:
                    raise UnboundSymbolError(f"symbol {s!r} is unbound")
            state = state + tuple(float(binding[s]) for s in comp["params"])
            cache = self._comp_cache.setdefault(idx, {})
            mat = cache.get(state)
            if mat is None:
                mat = self._build_component(comp, binding)
                if len(cache) >= 16:
                    cache.pop(next(iter(cache)))
                cache[state] = mat
            total = total + scale * mat
        return total.reshape(na * n, nb * n)


def gram(model: LodeGPModel, times) -> np.ndarray:
    """Prior covariance on a time grid, (N*n) x (N*n), time-major layout."""
    kernel, binding = model.resolved()
    g = GramEvaluator(kernel, times)(binding)
    return 0.5 * (g + g.T)


def cross_gram(model: LodeGPModel, times_a, times_b) -> np.ndarray:
    kernel, binding = model.resolved()
    return GramEvaluator(kernel, times_a, times_b)(binding)


def _chol_with_jitter(K: np.ndarray) -> tuple[np.ndarray, float]:
    """Cholesky with escalating jitter: 3 retries, x10, from 1e-10*trace."""
    try:
        return np.linalg.cholesky(K), 0.0
    except np.linalg.LinAlgError:
        pass
    jitter = 1e-10 * max(np.trace(K), 1e-300)
    eye = np.eye(K.shape[0])
    for _ in range(3):
        try:
            return np.linalg.cholesky(K + jitter * eye), jitter
        except np.linalg.LinAlgError:
            jitter *= 10.0
    raise NotPositiveDefiniteError(
        f"Cholesky failed after jitter escalation up to {jitter:.3e}"
    )


def _chol_solve(L: np.ndarray, b: np.ndarray) -> np.ndarray:
    return np.linalg.solve(L.T, np.linalg.solve(L, b))


def _training_system(model: LodeGPModel, data: Dataset, evaluator=None):
    kernel, binding = model.resolved()
    if evaluator is None:
        evaluator = GramEvaluator(kernel, data.times)
    K = evaluator(binding)
    K = 0.5 * (K + K.T)
    s2 = model.noise_variance()
    Ky = K + s2 * np.eye(K.shape[0])
    L, _ = _chol_with_jitter(Ky)
    y = data.values.reshape(-1)
    alpha = _chol_solve(L, y)
    return kernel, binding, L, alpha, y


def neg_mll(model: LodeGPModel, data: Dataset, evaluator=None) -> float:
    """Negative marginal log likelihood divided by the number of time points."""
    if len(data) == 0:
        raise ValueError("dataset is empty")
    _, _, L, alpha, y = _training_system(model, data, evaluator)
    n_obs = y.size
    logdet = 2.0 * float(np.sum(np.log(np.diag(L))))
    nll = 0.5 * float(y @ alpha) + 0.5 * logdet + 0.5 * n_obs * math.log(2.0 * math.pi)
    return nll / len(data)


def posterior_mean(model: LodeGPModel, data: Dataset | None, query_times) -> np.ndarray:
    """Posterior mean only (M x n); cheap path for dense query grids."""
    query_times = np.asarray(query_times, dtype=float)
    n = model.kernel.dim
    if data is None or len(data) == 0:
        return np.zeros((query_times.size, n))
    kernel, binding, L, alpha, _ = _training_system(model, data)
    Kqx = GramEvaluator(kernel, query_times, data.times)(binding)
    return (Kqx @ alpha).reshape(query_times.size, n)


def posterior(model: LodeGPModel, data: Dataset | None, query_times) -> Posterior:
    """Conditional Gaussian at the query times, with observation noise on the
    training blocks only."""
    query_times = np.asarray(query_times, dtype=float)
    kernel, binding = model.resolved()
    n = kernel.dim
    Kqq = GramEvaluator(kernel, query_times)(binding)
    Kqq = 0.5 * (Kqq + Kqq.T)
    if data is None or len(data) == 0:
        return Posterior(query_times, np.zeros((query_times.size, n)), Kqq)
    _, _, L, alpha, _ = _training_system(model, data)
    Kqx = GramEvaluator(kernel, query_times, data.times)(binding)
    mean = (Kqx @ alpha).reshape(query_times.size, n)
    W = np.linalg.solve(L, Kqx.T)
    cov = Kqq - W.T @ W
    cov = 0.5 * (cov + cov.T)
    return Posterior(query_times, mean, cov)


def sample(
    model: LodeGPModel,
    times,
    count: int = 1,
    seed: int = 0,
    condition: Dataset | None = None,
) -> list[np.ndarray]:
    """Joint draws from the prior (or posterior, when conditioned); the draw
    is deterministic given the seed.

    The factorization is eigendecomposition-based with negative eigenvalues
    clipped to zero.  These covariances are numerically low rank (that is the
    point of the construction), and adding a Cholesky jitter would inject
    independent per-point noise that finite differencing at small steps
    amplifies enormously; clipped eigenfactors keep the draws smooth.
    """
    times = np.asarray(times, dtype=float)
    n = model.kernel.dim
    post = posterior(model, condition, times)
    w, Q = np.linalg.eigh(post.covariance)
    # eigenvalues below the numerical-rank floor are indistinguishable from
    # rounding noise of the large ones; keeping them would reintroduce
    # independent per-point noise into the draws
    floor = 1e-12 * max(float(w[-1]), 0.0)
    w = np.where(w > floor, w, 0.0)
    root = Q * np.sqrt(w)
    rng = np.random.default_rng(seed)
    flat_mean = post.mean.reshape(-1)
    draws = []
    for _ in range(count):
        z = rng.standard_normal(flat_mean.size)
        draws.append((flat_mean + root @ z).reshape(times.size, n))
    return draws


def marginalize(model: LodeGPModel, channels) -> LodeGPModel:
    """Restrict to a channel subset; Gaussian marginalization is exact
    sub-blocking of the kernel matrix."""
    if not channels:
        raise EmptySelectionError("channel subset must not be empty")
    names = list(model.kernel.channels)
    indices = []
    for c in channels:
        if isinstance(c, str):
            if c not in names:
                raise KeyError(f"unknown channel {c!r}")
            indices.append(names.index(c))
        else:
            indices.append(int(c))
    kernel = model.kernel
    if isinstance(kernel, RefactorizeKernel):
        kernel = kernel.bind(model.ode_params)
    return LodeGPModel(
        kernel=kernel.sub_kernel(indices),
        raw_hypers=dict(model.raw_hypers),
        ode_params=dict(model.ode_params),
        noise_raw=model.noise_raw,
    )


def eig_count(model: LodeGPModel, times, threshold: float) -> int:
    """Number of prior Gram eigenvalues above the threshold."""
    if threshold <= 0:
        raise ValueError("threshold must be positive")
    K = gram(model, times)
    eig = np.linalg.eigvalsh(K)
    return int(np.sum(eig > threshold))


def init_model(kernel, raw_hypers=None, ode_params=None, noise_raw: float = 0.0) -> LodeGPModel:
    """Model with explicit raw values; missing hyper slots default to 0.0
    (transformed value 1.0 for exp slots)."""
    raws = {sym: 0.0 for sym, _ in kernel.hyper_slots}
    if raw_hypers:
        raws.update({k: float(v) for k, v in raw_hypers.items()})
    params = {s: 1.0 for s in kernel.param_symbols}
    if ode_params:
        params.update({k: float(v) for k, v in ode_params.items()})
    return LodeGPModel(kernel=kernel, raw_hypers=raws, ode_params=params, noise_raw=noise_raw)
