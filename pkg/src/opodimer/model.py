"""System parameters, steady states, stability eigenvalues, and thresholds.

Two degenerate parametric downconverters sit in one cavity pair and exchange
photons evanescently at both carrier frequencies. All rates are expressed in
units of the low-frequency cavity decay gamma_a; pump amplitudes may be
complex. The doubled-phase-space state ordering used everywhere in this
package is

    [alpha1, alpha1+, alpha2, alpha2+, beta1, beta1+, beta2, beta2+]

where the '+' variables are independent integration variables, not pathwise
conjugates of their partners.
"""

from __future__ import annotations

import cmath
import enum
import math
from dataclasses import dataclass, replace

import numpy as np
from scipy.optimize import brentq

from .errors import AboveThresholdError, NoCrossingError

# Relative guard band around |eps| = eps_crit: exactly-critical pumps are
# classified as at-or-above so the linearized analysis never runs on a
# marginally stable drift matrix.
THRESHOLD_GUARD = 1e-9

_RESIDUAL_TOL = 1e-12


class Regime(enum.Enum):
    BELOW_THRESHOLD = "below-threshold"
    AT_OR_ABOVE_THRESHOLD = "at-or-above-threshold"


@dataclass(frozen=True)
class SystemParams:
    """Physical constants of the coupled-cavity pair.

    kappa        effective second-order nonlinearity
    gamma_a/b    cavity decay rates at the low/high carrier frequency
    J_a/J_b      evanescent photon-exchange rates at each frequency
    Delta_a/b    cavity detunings from (half) the pump frequency
    eps1, eps2   complex pump amplitudes driving the two high-frequency modes
    """

    kappa: float = 0.01
    gamma_a: float = 1.0
    gamma_b: float = 1.0
    J_a: float = 0.0
    J_b: float = 0.0
    Delta_a: float = 0.0
    Delta_b: float = 0.0
    eps1: complex = 0.0
    eps2: complex = 0.0

    def __post_init__(self):
        for name in ("kappa", "gamma_a", "gamma_b"):
            v = float(getattr(self, name))
            if not (math.isfinite(v) and v > 0.0):
                raise ValueError(f"{name} must be positive and finite, got {v!r}")
            object.__setattr__(self, name, v)
        for name in ("J_a", "J_b", "Delta_a", "Delta_b"):
            v = float(getattr(self, name))
            if not math.isfinite(v):
                raise ValueError(f"{name} must be finite, got {v!r}")
            object.__setattr__(self, name, v)
        for name in ("eps1", "eps2"):
            v = complex(getattr(self, name))
            if not cmath.isfinite(v):
                raise ValueError(f"{name} must be finite, got {v!r}")
            object.__setattr__(self, name, v)

    @classmethod
    def symmetric(cls, *, kappa=0.01, gamma_a=1.0, gamma_b=1.0, J_a=0.0,
                  J_b=0.0, Delta_a=0.0, Delta_b=0.0, eps=None,
                  pump_fraction=None) -> "SystemParams":
        """Equal-pump constructor.

        The pump is given either directly (``eps``) or as a fraction of the
        critical amplitude (``pump_fraction``); omitting both leaves the
        cavity undriven.
        """
        if eps is not None and pump_fraction is not None:
            raise ValueError("give eps or pump_fraction, not both")
        base = cls(kappa=kappa, gamma_a=gamma_a, gamma_b=gamma_b, J_a=J_a,
                   J_b=J_b, Delta_a=Delta_a, Delta_b=Delta_b)
        if pump_fraction is not None:
            eps = pump_fraction * derived_scales(base).eps_crit
        elif eps is None:
            eps = 0.0
        return replace(base, eps1=complex(eps), eps2=complex(eps))

    @property
    def equal_pumps(self) -> bool:
        return self.eps1 == self.eps2

    @property
    def resonant(self) -> bool:
        return self.Delta_a == 0.0 and self.Delta_b == 0.0


@dataclass(frozen=True)
class DerivedScales:
    """Auxiliary rates and the threshold location for one parameter set."""

    gamma_tilde_a: float
    gamma_tilde_b: float
    eps_crit: float
    theta_b: float
    pump_fraction: float


@dataclass(frozen=True)
class SteadyState:
    """Classical fixed point with the low-frequency modes empty.

    The '+' partners equal the conjugates of beta1_ss/beta2_ss at any
    deterministic fixed point, so only the two independent values are stored.
    """

    beta1_ss: complex
    beta2_ss: complex
    regime: Regime
    alpha1_ss: complex = 0.0
    alpha2_ss: complex = 0.0

    def vector(self) -> np.ndarray:
        """Full 8-component state in the package ordering."""
        return np.array([
            self.alpha1_ss, np.conj(self.alpha1_ss),
            self.alpha2_ss, np.conj(self.alpha2_ss),
            self.beta1_ss, np.conj(self.beta1_ss),
            self.beta2_ss, np.conj(self.beta2_ss),
        ], dtype=complex)


def derived_scales(p: SystemParams) -> DerivedScales:
    """Auxiliary rates, threshold pump amplitude, and pump phase.

    eps_crit = sqrt([gamma_a^2 + (J_a - Delta_a)^2][gamma_b^2 + (J_b - Delta_b)^2]) / kappa,
    which reduces to gamma_tilde_a * gamma_tilde_b / kappa on resonance and to
    gamma_a * gamma_b / kappa on the Delta = J manifold. theta_b is the phase
    picked up by the intracavity pump field.
    """
    gta = math.hypot(p.gamma_a, p.J_a)
    gtb = math.hypot(p.gamma_b, p.J_b)
    eps_crit = math.sqrt(
        (p.gamma_a ** 2 + (p.J_a - p.Delta_a) ** 2)
        * (p.gamma_b ** 2 + (p.J_b - p.Delta_b) ** 2)
    ) / p.kappa
    theta_b = math.atan2(p.J_b - p.Delta_b, p.gamma_b)
    frac = max(abs(p.eps1), abs(p.eps2)) / eps_crit
    return DerivedScales(gamma_tilde_a=gta, gamma_tilde_b=gtb,
                         eps_crit=eps_crit, theta_b=theta_b,
                         pump_fraction=frac)


def drift_rhs(p: SystemParams, x) -> np.ndarray:
    """Deterministic part of the doubled-phase-space equations of motion.

    Accepts a state of shape (8,) or a stack of shape (8, n); returns the
    time derivative with the same shape.
    """
    x = np.asarray(x, dtype=complex)
    a1, a1p, a2, a2p, b1, b1p, b2, b2p = x
    ca = p.gamma_a + 1j * p.Delta_a
    cb = p.gamma_b + 1j * p.Delta_b
    k = p.kappa
    out = np.empty_like(x)
    out[0] = -ca * a1 + k * a1p * b1 + 1j * p.J_a * a2
    out[1] = -np.conj(ca) * a1p + k * a1 * b1p - 1j * p.J_a * a2p
    out[2] = -ca * a2 + k * a2p * b2 + 1j * p.J_a * a1
    out[3] = -np.conj(ca) * a2p + k * a2 * b2p - 1j * p.J_a * a1p
    out[4] = p.eps1 - cb * b1 - 0.5 * k * a1 * a1 + 1j * p.J_b * b2
    out[5] = np.conj(p.eps1) - np.conj(cb) * b1p - 0.5 * k * a1p * a1p - 1j * p.J_b * b2p
    out[6] = p.eps2 - cb * b2 - 0.5 * k * a2 * a2 + 1j * p.J_b * b1
    out[7] = np.conj(p.eps2) - np.conj(cb) * b2p - 0.5 * k * a2p * a2p - 1j * p.J_b * b1p
    return out


def _beta_fixed_point(p: SystemParams) -> tuple[complex, complex]:
    """High-frequency fields at the alpha = 0 fixed point."""
    if p.equal_pumps:
        b = p.eps1 / (p.gamma_b - 1j * (p.J_b - p.Delta_b))
        return b, b
    # Newton on the two independent pump-mode equations; the alpha = 0
    # subsystem is linear, so the iteration lands in one step and the loop
    # only confirms the residual.
    cb = p.gamma_b + 1j * p.Delta_b
    jac = np.array([[-cb, 1j * p.J_b], [1j * p.J_b, -cb]], dtype=complex)
    rhs = np.array([p.eps1, p.eps2], dtype=complex)
    beta = np.zeros(2, dtype=complex)
    for _ in range(20):
        resid = rhs + jac @ beta
        if np.max(np.abs(resid)) <= 1e-14 * max(1.0, abs(p.eps1), abs(p.eps2)):
            break
        beta = beta - np.linalg.solve(jac, resid)
    return complex(beta[0]), complex(beta[1])


def _unchecked_state(p: SystemParams) -> SteadyState:
    """Fixed point without the stability gate; used by threshold probing."""
    b1, b2 = _beta_fixed_point(p)
    frac = derived_scales(p).pump_fraction
    regime = (Regime.BELOW_THRESHOLD if frac < 1.0 - THRESHOLD_GUARD
              else Regime.AT_OR_ABOVE_THRESHOLD)
    return SteadyState(beta1_ss=b1, beta2_ss=b2, regime=regime)


def _is_below_threshold(p: SystemParams) -> bool:
    """True when every drift eigenvalue has positive real part and the pump
    sits strictly inside the guard band."""
    eigs = stability_eigenvalues(p)
    if float(np.min(eigs.real)) <= 0.0:
        return False
    if p.equal_pumps and derived_scales(p).pump_fraction >= 1.0 - THRESHOLD_GUARD:
        return False
    return True


def steady_state(p: SystemParams) -> SteadyState:
    """Below-threshold classical steady state.

    Equal pumps use the closed form beta_ss = eps / [gamma_b - i(J_b - Delta_b)];
    unequal pumps fall back on the numeric fixed-point solve. Raises
    AboveThresholdError when any stability eigenvalue has a non-positive real
    part (or the pump enters the guard band around eps_crit), since the
    fluctuation analysis built on this state would be meaningless there.
    """
    scales = derived_scales(p)
    if not _is_below_threshold(p):
        raise AboveThresholdError(
            f"pump amplitude {max(abs(p.eps1), abs(p.eps2)):.8g} is not below "
            f"threshold: eps_crit = {scales.eps_crit:.8g}",
            eps_crit=scales.eps_crit,
        )
    b1, b2 = _beta_fixed_point(p)
    state = SteadyState(beta1_ss=b1, beta2_ss=b2, regime=Regime.BELOW_THRESHOLD)
    resid = float(np.max(np.abs(drift_rhs(p, state.vector()))))
    if resid > _RESIDUAL_TOL * max(1.0, abs(p.eps1), abs(p.eps2)):
        raise RuntimeError(f"steady-state residual {resid:.3e} out of tolerance")
    return state


def sort_eigenvalues(values, real_tol: float = 1e-9) -> np.ndarray:
    """Canonical (Re, Im) lexicographic order, for cross-path comparison.

    Real parts within real_tol (scaled) are treated as ties so that exact
    analytic multiplets and their numerically fuzzed counterparts sort into
    the same sequence.
    """
    values = np.asarray(values, dtype=complex)
    if values.size == 0:
        return values
    v = values[np.argsort(values.real, kind="stable")]
    tol = real_tol * max(1.0, float(np.abs(v.real).max()))
    groups = []
    i = 0
    while i < len(v):
        j = i + 1
        while j < len(v) and v[j].real - v[i].real <= tol:
            j += 1
        block = v[i:j]
        groups.append(block[np.argsort(block.imag, kind="stable")])
        i = j
    return np.concatenate(groups)


def stability_eigenvalues(p: SystemParams) -> np.ndarray:
    """Decay eigenvalues of the fluctuation drift matrix, sorted by (Re, Im).

    Below threshold all real parts are positive; the slowest one touching
    zero marks the oscillation threshold. On resonance with equal real pumps
    the closed form applies:

        gamma_b +- i J_b                                   (each twice)
        gamma_a +- sqrt(kappa^2 eps^2 / gamma_tilde_b^2 - J_a^2)   (each twice)

    with the principal square root turning a negative argument into an
    imaginary pair. Anything else is delegated to the dense eigensolver on
    the assembled drift matrix at the alpha = 0 fixed point (which exists on
    both sides of threshold, so this routine never raises).
    """
    if p.resonant and p.equal_pumps and p.eps1.imag == 0.0:
        gtb = math.hypot(p.gamma_b, p.J_b)
        s = np.sqrt(complex((p.kappa * p.eps1.real / gtb) ** 2 - p.J_a ** 2))
        lam = [p.gamma_b + 1j * p.J_b, p.gamma_b - 1j * p.J_b,
               p.gamma_a + s, p.gamma_a - s]
        return sort_eigenvalues(lam + lam)
    from . import linearized  # deferred to break the module cycle

    m = linearized.build_linear_model(p, _unchecked_state(p))
    return linearized.numeric_eigenvalues(m)


def threshold_bisection(p: SystemParams, rtol: float = 1e-10) -> float:
    """Numeric threshold: equal real pump amplitude at which the slowest
    drift eigenvalue crosses zero.

    Ignores the pump fields of ``p`` and scans amplitude on
    [0, 10 * analytic eps_crit] with a bracketing root find on
    min Re eig(A). The eigenvalues come from the dense solver on the
    assembled drift matrix, never from the closed form, so this is an
    independent check of the analytic threshold. Raises NoCrossingError when
    the bracket does not change sign.
    """
    from . import linearized  # deferred to break the module cycle

    scales = derived_scales(p)
    hi = 10.0 * scales.eps_crit

    def slowest(e: float) -> float:
        q = replace(p, eps1=complex(e), eps2=complex(e))
        m = linearized.build_linear_model(q, _unchecked_state(q))
        return float(np.min(linearized.numeric_eigenvalues(m).real))

    f_lo, f_hi = slowest(0.0), slowest(hi)
    if not (f_lo > 0.0 > f_hi):
        raise NoCrossingError(
            f"min Re eig does not change sign on [0, {hi:.6g}]: "
            f"endpoints {f_lo:.6g}, {f_hi:.6g}")
    root = brentq(slowest, 0.0, hi, rtol=rtol, xtol=1e-12 * hi)
    return float(root)
