"""One-dimensional covariance kernels and their integrals.

Each :class:`Kernel1D` knows its mean embedding ``E(t) = ∫ k(s, t) ν(ds)``
and its double integral ``∬ k dν⊗ν`` against the uniform probability measure
on its domain.  Closed forms are written on ``[0, 1]`` and transported to a
general ``[a, b]`` by the affine map ``s -> (s - a) / (b - a)``, under which a
stationary kernel with length-scale ``θ`` becomes one with ``θ / (b - a)``.

>>> k = Kernel1D.brownian()
>>> round(k.double_integral(), 12)
0.333333333333
"""

from __future__ import annotations

import math
import re
from dataclasses import dataclass, field
from typing import Callable

import numpy as np
from scipy.special import gammainc, ndtr

from .errors import InvalidArgumentError
from .quadrature import DEFAULT_ORDER, Interval, Measure1D, gauss_legendre, split_rule

FAMILIES = ("exponential", "matern", "gaussian", "brownian")
MAX_MATERN_P = 8
SQRT_2PI = math.sqrt(2.0 * math.pi)


def matern_coefficients(p: int) -> np.ndarray:
    """Polynomial coefficients of ``A_p(u) = (Σ_ℓ c_ℓ u^ℓ) e^{-u}``.

    Normalized so that ``A_1(u) = (2 + u) e^{-u}`` and
    ``A_2(u) = (8 + 5u + u²) e^{-u}``; the unnormalized sums
    ``(1/ℓ!) Σ_i (p+i)!/i! 2^{p-i}`` are ``2**p`` times these.
    """
    if isinstance(p, bool) or int(p) != p or p < 0:
        raise InvalidArgumentError(f"Matérn order p must be a non-negative integer, got {p!r}")
    if p > MAX_MATERN_P:
        raise InvalidArgumentError(f"Matérn order p={p} exceeds the supported maximum {MAX_MATERN_P}")
    p = int(p)
    raw = [
        sum(math.factorial(p + i) / math.factorial(i) * 2 ** (p - i) for i in range(p - l + 1))
        / math.factorial(l)
        for l in range(p + 1)
    ]
    return np.array(raw) / 2**p


def _matern_prefactor(p: int) -> float:
    # p! 2^p / (2p)!, the constant in front of the bracket in E(t)
    return math.factorial(p) * 2**p / math.factorial(2 * p)


def _matern_profile(h, p: int, zeta: float):
    """Matérn ν = p + 1/2 correlation as a function of the lag ``h >= 0``."""
    u = h / zeta
    poly = np.zeros_like(u)
    for i in range(p + 1):
        coef = math.factorial(p + i) / (math.factorial(i) * math.factorial(p - i))
        poly = poly + coef * (2.0 * u) ** (p - i)
    return math.factorial(p) / math.factorial(2 * p) * poly * np.exp(-u)


def _matern_A(u, coeffs: np.ndarray):
    u = np.asarray(u, dtype=float)
    return np.polynomial.polynomial.polyval(u, coeffs) * np.exp(-u)


@dataclass(frozen=True)
class Kernel1D:
    """A one-dimensional covariance kernel on a compact interval.

    Use the named constructors rather than the raw fields::

        Kernel1D.gaussian(0.5)
        Kernel1D.matern(2, theta=0.3)
        Kernel1D.exponential(1.0, domain=Interval(-1, 2))
        Kernel1D.brownian()
    """

    family: str
    theta: float | None = None
    p: int | None = None
    domain: Interval = field(default_factory=Interval)

    def __post_init__(self):
        if self.family not in FAMILIES:
            raise InvalidArgumentError(f"unknown kernel family {self.family!r}; expected one of {FAMILIES}")
        if self.family == "brownian":
            if self.domain != Interval(0.0, 1.0):
                raise InvalidArgumentError("the Brownian kernel is only defined here on [0, 1]")
            return
        if self.theta is None or not math.isfinite(self.theta) or self.theta <= 0:
            raise InvalidArgumentError(f"{self.family} kernel needs theta > 0, got {self.theta!r}")
        object.__setattr__(self, "theta", float(self.theta))
        if self.family == "matern":
            matern_coefficients(self.p if self.p is not None else -1)
            object.__setattr__(self, "p", int(self.p))

    @classmethod
    def exponential(cls, theta: float, domain: Interval | None = None) -> "Kernel1D":
        return cls("exponential", theta, None, domain or Interval())

    @classmethod
    def matern(cls, p: int, theta: float, domain: Interval | None = None) -> "Kernel1D":
        return cls("matern", theta, p, domain or Interval())

    @classmethod
    def gaussian(cls, theta: float, domain: Interval | None = None) -> "Kernel1D":
        return cls("gaussian", theta, None, domain or Interval())

    @classmethod
    def brownian(cls) -> "Kernel1D":
        return cls("brownian")

    @property
    def measure(self) -> Measure1D:
        return Measure1D(self.domain)

    @property
    def stationary(self) -> bool:
        return self.family != "brownian"

    @property
    def zeta(self) -> float:
        """Matérn scale ``θ / sqrt(2ν)`` (equal to ``θ`` for the exponential)."""
        if self.family == "exponential":
            return self.theta
        if self.family == "matern":
            return self.theta / math.sqrt(2 * self.p + 1)
        raise AttributeError(f"{self.family} kernel has no zeta")

    def _check_domain(self, *arrays):
        for a in arrays:
            if not self.domain.contains(a):
                raise InvalidArgumentError(
                    f"input outside kernel domain [{self.domain.lower}, {self.domain.upper}]"
                )

    def __call__(self, x, y):
        x = np.asarray(x, dtype=float)
        y = np.asarray(y, dtype=float)
        self._check_domain(x, y)
        if self.family == "brownian":
            return np.minimum(x, y)
        h = np.abs(x - y)
        if self.family == "exponential":
            return np.exp(-h / self.theta)
        if self.family == "gaussian":
            return np.exp(-0.5 * (h / self.theta) ** 2)
        return _matern_profile(h, self.p, self.zeta)

    # -- closed forms on the unit interval ---------------------------------

    def _unit_theta(self) -> float:
        return self.theta / self.domain.length

    def _embedding_unit(self, t, theta: float):
        if self.family == "brownian":
            return t - 0.5 * t * t
        if self.family == "gaussian":
            return theta * SQRT_2PI * (ndtr((1.0 - t) / theta) + ndtr(t / theta) - 1.0)
        p = 0 if self.family == "exponential" else self.p
        zeta = theta / math.sqrt(2 * p + 1)
        c = matern_coefficients(p)
        return zeta * _matern_prefactor(p) * (2.0 * c[0] - _matern_A(t / zeta, c) - _matern_A((1.0 - t) / zeta, c))

    def _double_unit(self, theta: float) -> float:
        if self.family == "brownian":
            return 1.0 / 3.0
        if self.family == "gaussian":
            return 2.0 * theta**2 * math.expm1(-0.5 / theta**2) + theta * SQRT_2PI * (
                2.0 * ndtr(1.0 / theta) - 1.0
            )
        p = 0 if self.family == "exponential" else self.p
        zeta = theta / math.sqrt(2 * p + 1)
        c = matern_coefficients(p)
        # ∫_0^{1/ζ} u^ℓ e^{-u} du = ℓ! P(ℓ+1, 1/ζ)
        partial = sum(
            c[l] * math.factorial(l) * gammainc(l + 1, 1.0 / zeta) for l in range(p + 1)
        )
        return zeta * _matern_prefactor(p) * (2.0 * c[0] - 2.0 * zeta * partial)

    def mean_embedding(self, t):
        """``E(t) = ∫ k(s, t) ν(ds)`` for the uniform probability measure."""
        t = np.asarray(t, dtype=float)
        self._check_domain(t)
        if self.family == "brownian":
            return self._embedding_unit(t, 1.0)
        a, L = self.domain.lower, self.domain.length
        return self._embedding_unit((t - a) / L, self._unit_theta())

    def double_integral(self) -> float:
        if self.family == "brownian":
            return 1.0 / 3.0
        return float(self._double_unit(self._unit_theta()))

    def diagonal_mean(self) -> float:
        """``∫ k(x, x) ν(dx)``."""
        if self.family == "brownian":
            return 0.5
        return 1.0

    def describe(self) -> str:
        if self.family == "brownian":
            return "brownian"
        if self.family == "matern":
            return f"matern{{p={self.p},theta={self.theta:.17g}}}"
        return f"{self.family}{{theta={self.theta:.17g}}}"


@dataclass(frozen=True)
class ClosedFormIntegrals:
    mean_embedding: Callable
    double_integral: float
    source: str = "closed_form"


def quadrature_mean_embedding(k: Kernel1D, t, order: int = DEFAULT_ORDER):
    """Embedding by Gauss-Legendre quadrature split at the kink ``s = t``."""
    t = np.atleast_1d(np.asarray(t, dtype=float))
    out = np.empty_like(t)
    for i, ti in enumerate(t.flat):
        rule = split_rule(order, k.domain, ti)
        out.flat[i] = np.dot(rule.weights, k(rule.nodes, ti))
    return out


def quadrature_double_integral(k: Kernel1D, order: int = DEFAULT_ORDER) -> float:
    outer = gauss_legendre(order, k.domain)
    return float(np.dot(outer.weights, quadrature_mean_embedding(k, outer.nodes, order)))


def integrals(k: Kernel1D, method: str = "closed_form", order: int = DEFAULT_ORDER) -> ClosedFormIntegrals:
    if method == "closed_form":
        return ClosedFormIntegrals(k.mean_embedding, k.double_integral(), "closed_form")
    if method == "quadrature":
        return ClosedFormIntegrals(
            lambda t: quadrature_mean_embedding(k, t, order),
            quadrature_double_integral(k, order),
            "quadrature_fallback",
        )
    raise InvalidArgumentError(f"unknown integration method {method!r}")


def eval_kernel1d(k: Kernel1D, x, y):
    return k(x, y)


def mean_embedding(k: Kernel1D, t):
    return k.mean_embedding(t)


def double_integral(k: Kernel1D) -> float:
    return k.double_integral()


@dataclass(frozen=True)
class CentredKernel1D:
    """``k0(x, y) = k(x, y) - E(x) - E(y) + ℰ``, centred in each argument."""

    base: Kernel1D
    integrals: ClosedFormIntegrals

    def __call__(self, x, y):
        emb = self.integrals.mean_embedding
        return self.base(x, y) - emb(x) - emb(y) + self.integrals.double_integral

    @property
    def domain(self) -> Interval:
        return self.base.domain


def centre_kernel1d(k: Kernel1D, method: str = "closed_form") -> CentredKernel1D:
    return CentredKernel1D(k, integrals(k, method))


@dataclass(frozen=True)
class AnovaFactor1D:
    """``c + k0(x, y)``: a 1-D factor of an ANOVA kernel ``∏ (c_i + k0_i)``.

    Usable as a factor of a product kernel; its mean embedding is the
    constant ``c`` because ``k0`` is centred.
    """

    centred: CentredKernel1D
    offset: float = 1.0

    def __post_init__(self):
        if not self.offset > 0:
            raise InvalidArgumentError("the constant part of an ANOVA factor must be positive")

    @property
    def domain(self) -> Interval:
        return self.centred.domain

    def __call__(self, x, y):
        return self.offset + self.centred(x, y)

    def mean_embedding(self, t):
        return np.full(np.shape(t), self.offset)

    def double_integral(self) -> float:
        return self.offset

    def diagonal_mean(self) -> float:
        return self.offset + self.centred.base.diagonal_mean() - self.centred.integrals.double_integral

    def describe(self) -> str:
        return f"{self.offset:g} + centred {self.centred.base.describe()}"


# -- textual kernel specifications ----------------------------------------

_SPEC_RE = re.compile(r"^\s*([a-z_]+)\s*(?:\{(.*)\})?\s*$", re.IGNORECASE)


def parse_kernel(spec: str, domain: Interval | None = None) -> Kernel1D:
    """Parse ``gaussian{theta=0.7071}``, ``matern{p=1,theta=0.5}``, ``brownian``."""
    m = _SPEC_RE.match(spec)
    if not m:
        raise InvalidArgumentError(f"malformed kernel specification {spec!r}")
    family, body = m.group(1).lower(), m.group(2)
    params: dict[str, str] = {}
    if body and body.strip():
        for item in body.split(","):
            key, sep, value = item.partition("=")
            if not sep:
                raise InvalidArgumentError(f"expected key=value in kernel specification, got {item!r}")
            params[key.strip().lower()] = value.strip()
    try:
        if family == "brownian":
            if params:
                raise InvalidArgumentError("brownian takes no parameters")
            return Kernel1D.brownian()
        theta = float(params.pop("theta"))
        if family == "matern":
            p = int(params.pop("p"))
            kernel = Kernel1D.matern(p, theta, domain)
        elif family in ("exponential", "gaussian"):
            kernel = Kernel1D(family, theta, None, domain or Interval())
        else:
            raise InvalidArgumentError(f"unknown kernel family {family!r}")
    except KeyError as exc:
        raise InvalidArgumentError(f"kernel specification {spec!r} is missing {exc.args[0]!r}") from None
    except ValueError as exc:
        if isinstance(exc, InvalidArgumentError):
            raise
        raise InvalidArgumentError(f"bad numeric value in kernel specification {spec!r}") from None
    if params:
        raise InvalidArgumentError(f"unexpected parameters {sorted(params)} for {family}")
    return kernel
