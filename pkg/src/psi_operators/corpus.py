"""Built-in target functions used by the studies.

Each entry records why its declared sup-norm is valid: either the function is
bounded on the whole line, or (identity) the bound only holds on the window
the operators actually probe.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .exceptions import SpecificationError
from .operators import TargetFunction

__all__ = ["CorpusEntry", "CORPUS_LABELS", "SMOOTH_LABELS", "build_corpus", "make_target"]


@dataclass(frozen=True)
class CorpusEntry:
    label: str
    target: TargetFunction
    provenance: str


def _sin_modulus(theta):
    return 2.0 * math.sin(min(theta, math.pi) / 2.0)


def _zero(x):
    return np.zeros_like(np.asarray(x, dtype=float))


def _gauss_d(k):
    # d^k/dx^k exp(-x^2) = (-1)^k H_k(x) exp(-x^2) with physicists' Hermite H_k
    coeffs = np.zeros(k + 1)
    coeffs[k] = (-1.0) ** k
    return lambda x: np.polynomial.hermite.hermval(x, coeffs) * np.exp(-np.square(x))


# sup |d^k/dx^k exp(-x^2)| for k = 1..4; the k = 3 value sits at x^2 = (3 - sqrt 6)/2.
_X3 = math.sqrt((3.0 - math.sqrt(6.0)) / 2.0)
GAUSS_DERIVATIVE_NORMS = (
    math.sqrt(2.0) * math.exp(-0.5),
    2.0,
    abs((12.0 * _X3 - 8.0 * _X3**3) * math.exp(-_X3 * _X3)),
    12.0,
)


def _pi_multiples(a, b):
    return math.pi * np.arange(math.ceil(a / math.pi), math.floor(b / math.pi) + 1)


def _ramp_kinks(a, b):
    pts = np.array([-1.0, 1.0])
    return pts[(pts >= a) & (pts <= b)]


def make_target(label: str, half_width: float = 10.0) -> CorpusEntry:
    """Build one corpus entry.

    ``half_width`` bounds ``|x|`` over the region where the identity is
    evaluated, and is used as its window-local sup-norm.
    """
    if label == "const":
        target = TargetFunction(
            lambda x: np.ones_like(np.asarray(x, dtype=float)), 1.0,
            [_zero] * 4, [0.0] * 4, exact_modulus=lambda t: 0.0,
            derivative_moduli=[lambda t: 0.0] * 4, label=label,
        )
        note = "constant 1; bounded on R"
    elif label == "id":
        target = TargetFunction(
            lambda x: np.asarray(x, dtype=float), float(half_width),
            [lambda x: np.ones_like(np.asarray(x, dtype=float)), _zero, _zero, _zero], [1.0, 0.0, 0.0, 0.0],
            exact_modulus=lambda t: float(t), derivative_moduli=[lambda t: 0.0] * 4, label=label,
        )
        note = f"identity; sup-norm {half_width:g} holds only on |x| <= {half_width:g} (window-local)"
    elif label == "sin":
        target = TargetFunction(
            np.sin, 1.0,
            [np.cos, lambda x: -np.sin(x), lambda x: -np.cos(x), np.sin], [1.0] * 4,
            exact_modulus=_sin_modulus, derivative_moduli=[_sin_modulus] * 4, label=label,
        )
        note = "sin; bounded, Lipschitz 1"
    elif label == "cos":
        target = TargetFunction(
            np.cos, 1.0,
            [lambda x: -np.sin(x), lambda x: -np.cos(x), np.sin, np.cos], [1.0] * 4,
            exact_modulus=_sin_modulus, derivative_moduli=[_sin_modulus] * 4, label=label,
        )
        note = "cos; bounded, Lipschitz 1"
    elif label == "lorentz":
        target = TargetFunction(
            lambda x: 1.0 / (1.0 + np.square(x)), 1.0,
            [lambda x: -2.0 * x / (1.0 + x * x) ** 2, lambda x: (6.0 * x * x - 2.0) / (1.0 + x * x) ** 3],
            [3.0 * math.sqrt(3.0) / 8.0, 2.0], label=label,
        )
        note = "1/(1+x^2); bounded by 1"
    elif label == "gauss":
        target = TargetFunction(
            lambda x: np.exp(-np.square(x)), 1.0,
            [_gauss_d(k) for k in range(1, 5)], GAUSS_DERIVATIVE_NORMS, label=label,
        )
        note = "exp(-x^2); bounded by 1"
    elif label == "ramp":
        target = TargetFunction(
            lambda x: np.clip(x, -1.0, 1.0), 1.0,
            exact_modulus=lambda t: min(float(t), 2.0), label=label, breakpoints=_ramp_kinks,
        )
        note = "clip(x, -1, 1); bounded, kinks at +-1"
    elif label == "abs_sin":
        target = TargetFunction(
            lambda x: np.abs(np.sin(x)), 1.0,
            exact_modulus=lambda t: math.sin(t) if t < math.pi / 2 else 1.0,
            label=label, breakpoints=_pi_multiples,
        )
        note = "|sin x|; bounded, not differentiable at k*pi"
    else:
        raise SpecificationError(f"unknown corpus label {label!r}; known: {', '.join(CORPUS_LABELS)}")
    return CorpusEntry(label, target, note)


CORPUS_LABELS = ("const", "id", "sin", "cos", "lorentz", "gauss", "ramp", "abs_sin")
SMOOTH_LABELS = ("const", "id", "sin", "cos", "lorentz", "gauss")


def build_corpus(labels=CORPUS_LABELS, window=(-3.0, 3.0), margin: float = 10.0, step: float = 1e-2):
    """Resolve ``labels`` and verify every declared sup-norm on the probed region.

    The probed region is ``window`` widened by ``margin`` on both sides.
    """
    a, b = window
    half_width = max(abs(a), abs(b)) + margin
    count = int(math.ceil((b - a + 2 * margin) / step)) + 1
    xs = np.linspace(a - margin, b + margin, count)
    entries = []
    for label in labels:
        entry = make_target(label, half_width)
        t = entry.target
        if np.max(np.abs(t(xs))) > t.sup_norm * (1 + 1e-12):
            raise SpecificationError(f"{label}: declared sup-norm {t.sup_norm} violated on the study window")
        for k in range(1, t.order + 1):
            d = t.derivative(k)
            if np.max(np.abs(d(xs))) > d.sup_norm * (1 + 1e-12):
                raise SpecificationError(f"{label}: declared sup-norm of derivative {k} violated")
        entries.append(entry)
    return entries
