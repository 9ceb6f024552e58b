"""Scalar nonlinearities, their analytic derivatives, and how alike two are.

The training rules in this package pair a forward nonlinearity f with a
feedback nonlinearity g that need not equal f'.  The similarity axis is a
functional Pearson correlation computed by quadrature on the fixed interval
[-e, e]; see :func:`correlation_eta`.

All activations evaluate elementwise on numpy arrays and are stateless
after construction.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .numerics import RngStream

# Integration range for the correlation coefficient: +/- Euler's number.
ETA_RANGE = math.e
ETA_QUAD_POINTS = 10001


class UndefinedCorrelationError(ValueError):
    """Correlation requested against a zero-variance (constant) function."""


class Activation:
    """Base class: a named scalar function with an analytic derivative."""

    name = "activation"

    def __call__(self, x):
        raise NotImplementedError

    def derivative(self) -> "Activation":
        raise NotImplementedError

    def __repr__(self):
        return self.name


class Linear(Activation):
    """Identity; used for readout layers that emit raw logits."""

    name = "linear"

    def __call__(self, x):
        return np.asarray(x, dtype=float) + 0.0

    def derivative(self):
        return Constant(1.0)


class Constant(Activation):
    name = "constant"

    def __init__(self, value: float):
        self.value = float(value)
        self.name = f"constant({self.value:g})"

    def __call__(self, x):
        return np.full_like(np.asarray(x, dtype=float), self.value)

    def derivative(self):
        return Constant(0.0)


class Tanh(Activation):
    name = "tanh"

    def __call__(self, x):
        return np.tanh(x)

    def derivative(self):
        return TanhPrime()


class TanhPrime(Activation):
    """1 / cosh^2(x), the derivative of tanh."""

    name = "tanh_prime"

    def __call__(self, x):
        return 1.0 / np.cosh(x) ** 2

    def derivative(self):
        return _Negated(_TanhSecondTerm())


class _TanhSecondTerm(Activation):
    # d/dx sech^2 = -2 tanh(x) sech^2(x); stored unsigned for reuse
    name = "2*tanh*sech^2"

    def __call__(self, x):
        return 2.0 * np.tanh(x) / np.cosh(x) ** 2


class Cos(Activation):
    name = "cos"

    def __call__(self, x):
        return np.cos(x)

    def derivative(self):
        return _Negated(Sin())


class Sin(Activation):
    name = "sin"

    def __call__(self, x):
        return np.sin(x)

    def derivative(self):
        return Cos()


class _Negated(Activation):
    def __init__(self, inner: Activation):
        self.inner = inner
        self.name = f"-{inner.name}"

    def __call__(self, x):
        return -self.inner(x)

    def derivative(self):
        return _Negated(self.inner.derivative())


class ShiftedSin(Activation):
    """sin(x + theta); sweeping theta sweeps the correlation against -sin."""

    def __init__(self, theta: float):
        self.theta = float(theta)
        self.name = f"sin(x+{self.theta:g})"

    def __call__(self, x):
        return np.sin(np.asarray(x) + self.theta)

    def derivative(self):
        return _ShiftedCos(self.theta)


class _ShiftedCos(Activation):
    def __init__(self, theta: float):
        self.theta = float(theta)
        self.name = f"cos(x+{self.theta:g})"

    def __call__(self, x):
        return np.cos(np.asarray(x) + self.theta)

    def derivative(self):
        return _Negated(ShiftedSin(self.theta))


class Triangle(Activation):
    """Odd triangle wave, period 2*pi, amplitude 1: 0 at 0, 1 at pi/2."""

    name = "triangle"

    def __call__(self, x):
        return (2.0 / np.pi) * np.arcsin(np.sin(x))

    def derivative(self):
        return _TrianglePrime()


class _TrianglePrime(Activation):
    # Piecewise-constant slope +/- 2/pi; 0 exactly at the kinks.
    name = "triangle_prime"

    def __call__(self, x):
        return (2.0 / np.pi) * np.sign(np.cos(x))


class IntensityTanh(Activation):
    """tanh(|x|^2): intensity detection followed by an electrical tanh.

    Accepts complex input and returns a real response.  The derivative is
    with respect to a real argument (d/dx tanh(x^2) = 2x / cosh^2(x^2)).
    """

    name = "intensity_tanh"

    def __call__(self, x):
        return np.tanh(np.abs(x) ** 2)

    def derivative(self):
        return _IntensityTanhPrime()


class _IntensityTanhPrime(Activation):
    name = "intensity_tanh_prime"

    def __call__(self, x):
        x = np.asarray(x, dtype=float)
        return 2.0 * x / np.cosh(x ** 2) ** 2


@dataclass
class FourierCoeffs:
    """Coefficients of c1 + sum_k a_k sin(kx) + b_k cos(kx), k = 1..order.

    Normalized so |c1| + sum(|a_k| + |b_k|) == 1; this pins the overall
    scale, which the correlation coefficient is invariant to anyway.
    """

    c1: float
    a: np.ndarray
    b: np.ndarray

    def __post_init__(self):
        self.a = np.asarray(self.a, dtype=float)
        self.b = np.asarray(self.b, dtype=float)
        if self.a.shape != self.b.shape or self.a.ndim != 1:
            raise ValueError("a and b must be 1-D arrays of equal length")

    @property
    def order(self) -> int:
        return self.a.size

    def l1_weight(self) -> float:
        return abs(self.c1) + np.sum(np.abs(self.a)) + np.sum(np.abs(self.b))

    def normalized(self) -> "FourierCoeffs":
        w = self.l1_weight()
        if w == 0.0:
            raise ValueError("cannot normalize all-zero coefficients")
        return FourierCoeffs(self.c1 / w, self.a / w, self.b / w)

    def flatten(self) -> np.ndarray:
        return np.concatenate([[self.c1], self.a, self.b])

    @staticmethod
    def from_flat(v: np.ndarray) -> "FourierCoeffs":
        v = np.asarray(v, dtype=float)
        if v.size % 2 == 0 or v.size < 3:
            raise ValueError(f"flat coefficient vector must have odd length >= 3, got {v.size}")
        n = (v.size - 1) // 2
        return FourierCoeffs(float(v[0]), v[1:1 + n], v[1 + n:])


class Fourier(Activation):
    """Random-series activation c1 + sum a_k sin(kx) + b_k cos(kx)."""

    def __init__(self, coeffs: FourierCoeffs):
        if abs(coeffs.l1_weight() - 1.0) > 1e-12:
            raise ValueError(
                f"Fourier coefficients must be L1-normalized to 1, got {coeffs.l1_weight()!r}")
        self.coeffs = coeffs
        self.name = f"fourier(order={coeffs.order})"

    def __call__(self, x):
        x = np.asarray(x, dtype=float)
        k = np.arange(1, self.coeffs.order + 1)
        kx = np.multiply.outer(x, k)  # (..., order)
        return self.coeffs.c1 + np.sum(
            np.sin(kx) * self.coeffs.a + np.cos(kx) * self.coeffs.b, axis=-1)

    def derivative(self):
        return _FourierPrime(self.coeffs)


class _FourierPrime(Activation):
    """Termwise derivative: sum k (a_k cos(kx) - b_k sin(kx))."""

    def __init__(self, coeffs: FourierCoeffs):
        self.coeffs = coeffs
        self.name = f"fourier_prime(order={coeffs.order})"

    def __call__(self, x):
        x = np.asarray(x, dtype=float)
        k = np.arange(1, self.coeffs.order + 1)
        kx = np.multiply.outer(x, k)
        return np.sum(k * (np.cos(kx) * self.coeffs.a - np.sin(kx) * self.coeffs.b), axis=-1)


def random_fourier(rng: RngStream, order: int = 4) -> FourierCoeffs:
    """Draw coefficients uniform on [-1, 1] and L1-normalize them.

    The all-zero draw (probability zero up to float granularity) is
    redrawn rather than normalized.
    """
    while True:
        c1 = float(rng.uniform(-1.0, 1.0))
        a = rng.uniform(-1.0, 1.0, size=order)
        b = rng.uniform(-1.0, 1.0, size=order)
        raw = FourierCoeffs(c1, a, b)
        if raw.l1_weight() > 0.0:
            return raw.normalized()


def correlation_eta(fprime, g, *, points: int = ETA_QUAD_POINTS) -> float:
    """Functional Pearson correlation of two callables over [-e, e].

    Computed by composite trapezoid quadrature on a uniform grid; the
    result is clamped to [-1, 1] to absorb round-off.  Raises
    :class:`UndefinedCorrelationError` if either function is constant on
    the interval.
    """
    x = np.linspace(-ETA_RANGE, ETA_RANGE, points)
    fv = np.asarray(fprime(x), dtype=float)
    gv = np.asarray(g(x), dtype=float)
    width = 2.0 * ETA_RANGE
    f_mean = np.trapezoid(fv, x) / width
    g_mean = np.trapezoid(gv, x) / width
    fc = fv - f_mean
    gc = gv - g_mean
    var_f = np.trapezoid(fc * fc, x)
    var_g = np.trapezoid(gc * gc, x)
    if var_f < 1e-24 or var_g < 1e-24:
        raise UndefinedCorrelationError(
            "correlation undefined: at least one function is constant on [-e, e]")
    eta = np.trapezoid(fc * gc, x) / math.sqrt(var_f * var_g)
    return float(np.clip(eta, -1.0, 1.0))


def from_spec(spec: str) -> Activation:
    """Parse an activation from its config string.

    Formats: ``tanh`` | ``cos`` | ``sin`` | ``triangle`` | ``linear`` |
    ``intensity_tanh`` | ``shifted_sin:<theta>`` |
    ``fourier:<c1>,<a1..aN>,<b1..bN>`` (coefficients are L1-normalized) |
    ``neg:<spec>`` (negation of any of the above).
    """
    spec = spec.strip()
    if spec.startswith("neg:"):
        return _Negated(from_spec(spec[4:]))
    kind, _, arg = spec.partition(":")
    kind = kind.strip().lower()
    simple = {
        "tanh": Tanh,
        "cos": Cos,
        "sin": Sin,
        "triangle": Triangle,
        "linear": Linear,
        "intensity_tanh": IntensityTanh,
    }
    if kind in simple:
        if arg:
            raise ValueError(f"activation '{kind}' takes no parameter")
        return simple[kind]()
    if kind == "shifted_sin":
        return ShiftedSin(float(arg))
    if kind == "fourier":
        vals = np.array([float(tok) for tok in arg.split(",")])
        return Fourier(FourierCoeffs.from_flat(vals).normalized())
    raise ValueError(f"unknown activation spec '{spec}'")
