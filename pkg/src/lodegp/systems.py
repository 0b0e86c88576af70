"""Built-in benchmark systems with closed-form reference solutions.

Operator matrices are stored exactly (gravity as 981/100); reference
solutions are evaluated in floating point and drive data generation.
"""

from __future__ import annotations

from dataclasses import dataclass, replace
from typing import Callable

import numpy as np

from .errors import NoReferenceSolutionError, UnknownSystemError
from .opalgebra import OperatorMatrix, parse_matrix


@dataclass(frozen=True)
class SystemSpec:
    name: str
    channels: tuple
    param_symbols: tuple
    param_defaults: dict  # values used for data generation / truth
    param_init: dict  # training initial guesses
    matrix: OperatorMatrix
    ref_solution: Callable | None
    train_interval: tuple
    eval_interval: tuple
    noise_std: float
    equations: tuple  # grammar strings, row major (round-trips the matrix)

    def with_matrix(self, matrix: OperatorMatrix, equations) -> "SystemSpec":
        return replace(self, matrix=matrix, equations=tuple(tuple(r) for r in equations))


def _bipendulum_solution(t):
    # exact image of the latent function sin(3t) / (10 (t+1)) under the
    # solution-generating column [D^2+g/2, (D^2+g)/2, (D^2+g/2)(D^2+g)]
    t = np.asarray(t, dtype=float)
    s, c = np.sin(3 * t), np.cos(3 * t)
    w = t + 1.0
    f1 = -819 * s / (2000 * w) - 3 * c / (5 * w**2) + s / (5 * w**3)
    f2 = 81 * s / (2000 * w) - 3 * c / (10 * w**2) + s / (10 * w**3)
    u = (
        -66339 * s / (200000 * w)
        + 1971 * c / (1000 * w**2)
        - 7857 * s / (1000 * w**3)
        - 36 * c / (5 * w**4)
        + 12 * s / (5 * w**5)
    )
    return np.stack([f1, f2, u], axis=-1)


def _heating_solution(t):
    t = np.asarray(t, dtype=float)
    e = np.exp(-t / 10)
    s, c = np.sin(t / 2), np.cos(t / 2)
    f1 = 0.5 * c * e + 0.9 * e * s
    f2 = e * s
    u = 1.9 * c * e - 0.64 * e * s
    return np.stack([f1, f2, u], axis=-1)


def _three_tank_solution(t):
    t = np.asarray(t, dtype=float)
    e2, e4 = np.exp(-t / 2), np.exp(-t / 4)
    f1 = e2
    f2 = e4
    f3 = e4 - e2
    u1 = -e2 / 2
    u2 = -e4 / 4 + e2 / 2
    return np.stack([f1, f2, f3, u1, u2], axis=-1)


_G = "981/100"

_REGISTRY = {
    "bipendulum": dict(
        channels=("f1", "f2", "u"),
        params=(),
        defaults={},
        equations=(
            (f"D^2 + {_G}", "0", "-1"),
            ("0", f"D^2 + {_G}/2", "-1/2"),
        ),
        ref=_bipendulum_solution,
        train=(1.0, 6.0),
        eval=(1.0, 11.0),
        noise=0.012,
    ),
    "bipendulum-equal": dict(
        channels=("f1", "f2", "u"),
        params=(),
        defaults={},
        equations=(
            (f"D^2 + {_G}", "0", "-1"),
            ("0", f"D^2 + {_G}", "-1"),
        ),
        ref=None,
        train=(1.0, 6.0),
        eval=(1.0, 11.0),
        noise=0.012,
    ),
    "heating": dict(
        channels=("f1", "f2", "u"),
        params=("a", "b"),
        defaults={"a": 3.0, "b": 1.0},
        equations=(
            ("D + a", "-a", "-1"),
            ("-b", "D + b", "0"),
        ),
        ref=_heating_solution,
        train=(-5.0, 5.0),
        eval=(-9.0, 9.0),
        noise=0.02,
    ),
    "three-tank": dict(
        channels=("f1", "f2", "f3", "u1", "u2"),
        params=(),
        defaults={},
        equations=(
            ("-D", "0", "0", "1", "0"),
            ("0", "-D", "0", "1", "1"),
            ("0", "0", "-D", "0", "1"),
        ),
        ref=_three_tank_solution,
        train=(1.0, 6.0),
        eval=(1.0, 11.0),
        noise=0.08,
    ),
}

SYSTEM_NAMES = tuple(_REGISTRY)


def make_system(name: str) -> SystemSpec:
    """Construct a built-in benchmark system by name."""
    entry = _REGISTRY.get(name)
    if entry is None:
        raise UnknownSystemError(
            f"unknown system {name!r}; available: {', '.join(_REGISTRY)}"
        )
    matrix = parse_matrix(entry["equations"], symbols=entry["params"])
    return SystemSpec(
        name=name,
        channels=entry["channels"],
        param_symbols=entry["params"],
        param_defaults=dict(entry["defaults"]),
        param_init={s: 1.0 for s in entry["params"]},
        matrix=matrix,
        ref_solution=entry["ref"],
        train_interval=entry["train"],
        eval_interval=entry["eval"],
        noise_std=entry["noise"],
        equations=entry["equations"],
    )


def generate_data(spec: SystemSpec, count: int, interval=None, noise_std=None, seed: int = 0):
    """Sample the reference solution on a uniformly spaced grid, optionally
    adding white observation noise.  Returns a gp.Dataset."""
    from .gp import Dataset

    if spec.ref_solution is None:
        raise NoReferenceSolutionError(
            f"system {spec.name!r} has no closed-form reference solution"
        )
    if interval is None:
        interval = spec.train_interval
    if noise_std is None:
        noise_std = spec.noise_std
    times = np.linspace(interval[0], interval[1], count)
    values = spec.ref_solution(times)
    if noise_std:
        rng = np.random.default_rng(seed)
        values = values + noise_std * rng.standard_normal(values.shape)
    return Dataset(times=times, values=values, channels=spec.channels)
