"""Closed-form quantities of the model family.

The family is indexed by ``(beta, gamma, alpha, delta, dim)``.  Vertices carry
uniform marks ``u``; a small mark is a powerful vertex.  Two vertices at
distance ``r`` are joined when the pair mark ``v`` satisfies

    v <= rho(g(u_x, u_y) * r**dim / beta),   rho(x) = min(1, x**-delta),
    g(s, t) = min(s, t)**gamma * max(s, t)**alpha.

``alpha = 0`` is the soft Boolean model, ``alpha = gamma`` scale-free
percolation and ``gamma = alpha = 0`` long-range percolation.
"""

from __future__ import annotations

import math
from dataclasses import asdict, dataclass, field
from enum import Enum
from typing import Optional

import numpy as np

__all__ = [
    "ModelParams",
    "Prediction",
    "Regime",
    "unit_ball_volume",
    "profile",
    "kernel",
    "mark_to_radius",
    "mark_to_edge_weight",
    "predict",
    "s_threshold",
    "profile_integral",
    "degree_intensity_above",
    "BOUNDARY_TOL",
]

BOUNDARY_TOL = 1e-9


class Regime(str, Enum):
    LONG_RANGE_DOMINATED = "LongRangeDominated"
    BOUNDARY = "Boundary"
    MIXED = "Mixed"
    NO_SUBCRITICAL_PHASE = "NoSubcriticalPhase"


@dataclass(frozen=True)
class ModelParams:
    """Model parameters.

    Parameters
    ----------
    beta : float
        Edge intensity, > 0.
    gamma : float
        Radius tail parameter in [0, 1).
    alpha : float
        Second kernel exponent in [0, 2 - gamma).
    delta : float
        Long-range decay, > 1.
    dim : int
        Spatial dimension, >= 1.
    """

    beta: float
    gamma: float
    alpha: float = 0.0
    delta: float = 2.0
    dim: int = 1

    def __post_init__(self):
        errs = []
        if not (math.isfinite(self.beta) and self.beta > 0):
            errs.append(f"beta must be > 0 (got {self.beta})")
        if not (0.0 <= self.gamma < 1.0):
            errs.append(f"gamma must lie in [0, 1) (got {self.gamma})")
        if not (0.0 <= self.alpha < 2.0 - self.gamma):
            errs.append(f"alpha must lie in [0, 2 - gamma) (got {self.alpha})")
        if not (math.isfinite(self.delta) and self.delta > 1.0):
            errs.append(f"delta must be > 1 (got {self.delta})")
        if int(self.dim) != self.dim or self.dim < 1:
            errs.append(f"dim must be a positive integer (got {self.dim})")
        if errs:
            raise ValueError("; ".join(errs))
        object.__setattr__(self, "dim", int(self.dim))

    def replace(self, **kw) -> "ModelParams":
        d = asdict(self)
        d.update(kw)
        return ModelParams(**d)

    @property
    def is_soft_boolean(self) -> bool:
        return self.alpha == 0.0


@dataclass(frozen=True)
class Prediction:
    """Predicted regime, exponents and thresholds.

    Exponents are positive decay rates ``a`` with survival ``~ m**-a``.
    ``None`` marks a quantity that is undefined for the given parameters.
    """

    regime: Optional[str]
    diameter_exponent: Optional[float]
    size_exponent: Optional[float]
    zeta: Optional[float]
    beta0: Optional[float]
    beta1_lower: Optional[float]
    gamma_critical: float
    degree_tau: Optional[float]
    c_hat: Optional[float]
    branching_gate: Optional[float]
    flags: list = field(default_factory=list)

    def to_dict(self) -> dict:
        return asdict(self)


def unit_ball_volume(dim: int) -> float:
    """Volume of the unit ball in ``dim`` dimensions."""
    if dim < 1:
        raise ValueError("dim must be >= 1")
    return math.pi ** (dim / 2.0) / math.gamma(dim / 2.0 + 1.0)


def profile(x, delta):
    """``min(1, x**-delta)``; accepts scalars or arrays."""
    if np.ndim(x) == 0:
        return 1.0 if x <= 1.0 else float(x) ** (-delta)
    x = np.asarray(x, dtype=float)
    out = np.ones_like(x)
    big = x > 1.0
    out[big] = x[big] ** (-delta)
    return out


def kernel(s, t, gamma, alpha=0.0):
    """``min(s,t)**gamma * max(s,t)**alpha``.

    Nondecreasing in each argument for nonnegative exponents.
    """
    lo = np.minimum(s, t)
    hi = np.maximum(s, t)
    out = lo**gamma * hi**alpha
    return float(out) if np.ndim(out) == 0 else out


def mark_to_radius(u, gamma):
    """Pareto radius ``u**-gamma``; ``P(R > r) = r**(-1/gamma)``."""
    return u ** (-gamma)


def mark_to_edge_weight(v, delta):
    """Pareto edge weight ``v**(-1/delta)``; ``P(W > w) = w**-delta``."""
    return v ** (-1.0 / delta)


def s_threshold(m: float, zeta: float) -> float:
    """Mark scale ``m**-zeta`` below which a vertex reaches distance ``m``."""
    if m <= 1.0:
        raise ValueError("m must exceed 1")
    if zeta <= 0.0:
        raise ValueError("zeta must be positive")
    return m ** (-zeta)


def profile_integral(dim: int, delta: float) -> float:
    """``int rho(|x|**dim) dx`` over R^dim, equal to ``omega_d delta/(delta-1)``."""
    return unit_ball_volume(dim) * delta / (delta - 1.0)


def degree_intensity_above(params: ModelParams, u: float) -> float:
    """Mean number of neighbours with mark above ``u`` of a vertex with mark ``u``.

    Integrating the edge probability over space gives
    ``beta * kernel(u, t) * profile_integral`` per unit of mark ``t``, so for
    ``alpha = 0`` the result is ``beta*omega_d*delta/(delta-1) * u**-gamma * (1-u)``.
    """
    c = params.beta * profile_integral(params.dim, params.delta)
    g, a = params.gamma, params.alpha
    if a == 0.0:
        return c * u ** (-g) * (1.0 - u)
    # int_u^1 (u^g t^a)^{-1} dt
    p = 1.0 - a
    if abs(p) < 1e-15:
        return c * u ** (-g) * (-math.log(u))
    return c * u ** (-g) * (1.0 - u**p) / p


def _classify(gamma: float, delta: float) -> Regime:
    lo = 1.0 / (delta + 1.0)
    hi = delta / (delta + 1.0)
    if gamma >= hi:
        return Regime.NO_SUBCRITICAL_PHASE
    if abs(gamma - lo) <= BOUNDARY_TOL:
        return Regime.BOUNDARY
    if gamma < lo:
        return Regime.LONG_RANGE_DOMINATED
    return Regime.MIXED


def predict(params: ModelParams) -> Prediction:
    """Regime, tail exponents and thresholds for ``params``.

    Exponents are only stated for the soft Boolean model (``alpha = 0``), except
    the cluster-size exponent which also applies to scale-free percolation
    (``alpha = gamma``).  Other values of ``alpha`` get ``None`` there.
    """
    b, g, a, de, d = params.beta, params.gamma, params.alpha, params.delta, params.dim
    w = unit_ball_volume(d)
    flags: list[str] = []
    gamma_c = de / (de + 1.0)
    regime = _classify(g, de)
    tau = 1.0 + 1.0 / g if g > 0 else None
    zeta = (de - 1.0) / (g * de) if g > 0 else None
    if g == 0.0:
        flags.append("gamma_zero_zeta_undefined")

    subcritical_possible = regime is not Regime.NO_SUBCRITICAL_PHASE
    if subcritical_possible:
        slack = de - g * (de + 1.0)
        beta0 = (de - 1.0) * slack / ((2.0 ** (d * de + 3.0) + 1.0) * w * de**2)
        c_hat = 2.0 ** (d * de + 3.0) * w * de**2 / ((de - 1.0) * slack)
        if g < 0.5:
            b1 = (de - 1.0) / (w * de) / (1.0 / (1.0 - 2.0 * g) + 1.0 / (1.0 - g))
            beta1 = max(b1, beta0)
        else:
            beta1 = beta0
    else:
        beta0 = beta1 = c_hat = None
        flags.append("no_subcritical_phase")

    gate = (de - 1.0) * (1.0 - 2.0 * g) / (w * de) if g < 0.5 else None

    diam = None
    size = None
    if a == 0.0 and subcritical_possible:
        if regime is Regime.MIXED:
            diam = (de - 1.0 + g) / (g * de) - 1.0
        else:
            diam = de - 1.0
            if regime is Regime.BOUNDARY:
                flags.append("boundary_log_correction")
    elif a != 0.0:
        flags.append("diameter_exponent_undefined_for_alpha")

    if subcritical_possible and (a == 0.0 or a == g) and g > 0:
        if abs(g - 0.5) <= BOUNDARY_TOL:
            flags.append("size_boundary_gamma_half")
        elif g < 0.5:
            size = 1.0 / g - 1.0
        else:
            flags.append("size_infinite_mean")
    elif g == 0.0 and subcritical_possible:
        flags.append("size_light_tail")

    if beta0 is not None and b < beta0:
        flags.append("beta_below_beta0")

    return Prediction(
        regime=regime.value,
        diameter_exponent=diam,
        size_exponent=size,
        zeta=zeta,
        beta0=beta0,
        beta1_lower=beta1,
        gamma_critical=gamma_c,
        degree_tau=tau,
        c_hat=c_hat,
        branching_gate=gate,
        flags=flags,
    )
