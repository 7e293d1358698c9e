"""Stationary spectral matrix and quadrature projections.

For the linear fluctuation equation d(dx) = -A dx dt + B dW the stationary
two-frequency correlations are

    S(omega) = (A + i omega 1)^-1 B B^T (A^T - i omega 1)^-1,

normally ordered and intracavity. Projecting S onto quadrature coefficient
vectors and applying the input-output relation S_out = baseline + 2 gamma_a V
gives every measurable spectrum handled by this package. The coherent-state
baseline is 1 per unit-weight single mode; a combination's baseline follows
from the same commutator algebra (see vacuum_baseline).
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .errors import AboveThresholdError, DomainError, DetuningMismatchError, SingularAtFrequencyError
from .model import SystemParams, THRESHOLD_GUARD, derived_scales

COND_LIMIT = 1e12

_IMAG_RESIDUE_TOL = 1e-10


def _frozen(a: np.ndarray) -> np.ndarray:
    a.setflags(write=False)
    return a


@dataclass(frozen=True, eq=False)
class SpectralMatrix:
    """Raw S(omega) for one model at one frequency, plus the conditioning of
    the resolvent factor that produced it."""

    omega: float
    S: np.ndarray
    cond: float


@dataclass(frozen=True)
class QuadratureSelector:
    """One local-oscillator choice: mode index (1 or 2) and angle theta.

    theta is kept as given; theta_reported folds it into [0, pi), which is
    lossless for variances (X^theta and X^(theta+pi) have equal variance).
    """

    mode: int
    theta: float

    def __post_init__(self):
        if self.mode not in (1, 2):
            raise ValueError(f"mode must be 1 or 2, got {self.mode!r}")
        object.__setattr__(self, "theta", float(self.theta))

    @property
    def theta_reported(self) -> float:
        return self.theta % math.pi


def spectral_matrix(model, omega: float) -> SpectralMatrix:
    """Evaluate S(omega) by two linear solves with partial pivoting.

    Works for the 8x8 model and the 4x4 combined model alike. Raises
    SingularAtFrequency when (A + i omega) is ill-conditioned beyond 1e12,
    which at omega = 0 signals an at-threshold drift matrix.
    """
    A = model.A
    n = A.shape[0]
    eye = np.eye(n)
    shifted = A + 1j * omega * eye
    cond = float(np.linalg.cond(shifted))
    if not math.isfinite(cond) or cond > COND_LIMIT:
        raise SingularAtFrequencyError(
            f"condition number {cond:.3e} of (A + i omega) exceeds {COND_LIMIT:.0e} "
            f"at omega = {omega:g}")
    left = np.linalg.solve(shifted, model.diffusion())
    # right factor (A^T - i omega)^-1: solve (A - i omega) Y^T = left^T,
    # then Y = left (A^T - i omega)^-1.
    S = np.linalg.solve(A - 1j * omega * eye, left.T).T
    return SpectralMatrix(omega=float(omega), S=_frozen(S), cond=cond)


def coefficient_vector(n: int, terms) -> np.ndarray:
    """Quadrature-combination coefficients in the doubled ordering.

    terms is an iterable of (mode, theta, weight); the selected mode's bare
    slot receives weight * e^{-i theta} and its '+' slot weight * e^{+i theta}.
    """
    c = np.zeros(n, dtype=complex)
    for mode, theta, weight in terms:
        s = 2 * (mode - 1)
        if not 0 <= s < n:
            raise ValueError(f"mode {mode} out of range for a {n}-variable model")
        c[s] += weight * np.exp(-1j * theta)
        c[s + 1] += weight * np.exp(1j * theta)
    return c


def vacuum_baseline(terms1, terms2) -> float:
    """Coherent-state (vacuum) moment of two quadrature combinations.

    Every same-mode pair contributes w1 w2 cos(theta1 - theta2) per unit of
    the mode's vacuum variance; cross-mode pairs contribute nothing. This
    reduces to 1 for a variance, 0 for orthogonal-quadrature or cross-mode
    covariances.
    """
    base = 0.0
    for m1, t1, w1 in terms1:
        for m2, t2, w2 in terms2:
            if m1 == m2:
                base += w1 * w2 * math.cos(t1 - t2)
    return base


def output_moment(S: SpectralMatrix, terms1, terms2, gamma_a: float,
                  unit_baseline: float = 1.0) -> float:
    """Output-normalized symmetrized moment of two quadrature combinations.

    value = unit_baseline * vacuum term + 2 gamma_a * Re[(c1.S.c2 + c2.S.c1)/2].
    Taking the real part implements the +-omega average exactly: conjugation
    symmetry of the doubled phase space gives S(-w) = C S(w)* C with C the
    pairwise slot swap, under which the symmetrized projection conjugates.
    unit_baseline is the vacuum variance carried by one unit of mode weight
    (1 for bare modes, 2 for the unnormalized sum/difference modes).
    """
    mat = S.S
    c1 = coefficient_vector(mat.shape[0], terms1)
    c2 = coefficient_vector(mat.shape[0], terms2)
    v = complex(0.5 * (c1 @ mat @ c2 + c2 @ mat @ c1))
    scale = max(1.0, abs(v))
    assert abs(v.imag) <= _IMAG_RESIDUE_TOL * scale, \
        f"imaginary residue {v.imag:.3e} in quadrature projection"
    base = unit_baseline * vacuum_baseline(terms1, terms2)
    return base + 2.0 * gamma_a * v.real


def quadrature_variance_out(S: SpectralMatrix, q1: QuadratureSelector,
                            q2: QuadratureSelector, gamma_a: float) -> float:
    """Output spectral moment of two single-mode quadratures.

    Equal selectors give the variance (baseline 1); a cross-mode or
    orthogonal-quadrature pair gives the covariance (baseline 0).
    """
    return output_moment(S, [(q1.mode, q1.theta, 1.0)],
                         [(q2.mode, q2.theta, 1.0)], gamma_a)


def combined_variance_out(S: SpectralMatrix, branch: str, theta: float,
                          gamma_a: float) -> float:
    """Output variance of one sum/difference quadrature from the 4x4 model.

    branch is "plus" or "minus"; the combined modes are unnormalized, so the
    vacuum baseline per mode is 2.
    """
    idx = {"plus": 1, "minus": 2}[branch]
    return output_moment(S, [(idx, theta, 1.0)], [(idx, theta, 1.0)],
                         gamma_a, unit_baseline=2.0)


def _require_equal_real_pumps(p: SystemParams, exc) -> float:
    if not p.equal_pumps or p.eps1.imag != 0.0:
        raise exc("closed forms require equal real pumps, got "
                  f"eps1 = {p.eps1}, eps2 = {p.eps2}")
    return p.eps1.real


def _require_below(p: SystemParams) -> None:
    scales = derived_scales(p)
    if scales.pump_fraction >= 1.0 - THRESHOLD_GUARD:
        raise AboveThresholdError(
            f"pump fraction {scales.pump_fraction:.6g} is not below threshold "
            f"eps_crit = {scales.eps_crit:.8g}", eps_crit=scales.eps_crit)


def analytic_variances(p: SystemParams, omega: float) -> dict:
    """Closed-form resonant output spectra at local-oscillator angle zero.

    Valid at zero detuning with equal real pumps below threshold. Returns
    S_X, S_Y (variances at theta = 0, pi/2), the single-mode covariance
    V_XY, and the cross-mode covariances V_X1X2, V_Y1Y2 = -V_X1X2. The sign
    of the J_b^2 cross term in S_Y is fixed by the pump-reversal symmetry
    S_X(-eps) = S_Y(eps); with the opposite sign the form disagrees with the
    numeric pipeline by up to hundreds of percent (see tests).
    """
    if not p.resonant:
        raise DomainError(
            f"resonant closed forms need Delta_a = Delta_b = 0, got "
            f"Delta_a = {p.Delta_a:g}, Delta_b = {p.Delta_b:g}")
    eps = _require_equal_real_pumps(p, DomainError)
    _require_below(p)
    ga, gb, ja, jb = p.gamma_a, p.gamma_b, p.J_a, p.J_b
    gta2 = ga * ga + ja * ja
    gtb2 = gb * gb + jb * jb
    ke = p.kappa * eps
    w2 = omega * omega
    den = 4.0 * ga * ga * gtb2 * gtb2 * w2 + (gtb2 * (gta2 - w2) - ke * ke) ** 2
    core = gb * (gtb2 * (w2 - ja * ja) + jb * jb * ga * ga)
    s_x = 1.0 + 4.0 * ga * ke * (core + gb * (ga * gb + ke) ** 2
                                 + 2.0 * ga * jb * jb * ke) / den
    s_y = 1.0 - 4.0 * ga * ke * (core + gb * (ga * gb - ke) ** 2
                                 - 2.0 * ga * jb * jb * ke) / den
    v_xy = 4.0 * ga * jb * ke * (gtb2 * (ga * ga - ja * ja + w2) + ke * ke) / den
    v_x1x2 = -8.0 * ja * jb * ga * ga * gtb2 * ke / den
    return {"S_X": s_x, "S_Y": s_y, "V_XY": v_xy,
            "V_X1X2": v_x1x2, "V_Y1Y2": -v_x1x2}


def analytic_combined(p: SystemParams, omega: float) -> dict:
    """Closed-form output spectra of the sum/difference quadratures.

    Valid on the Delta_a = J_a, Delta_b = J_b manifold with equal real pumps
    below threshold, where the intracavity pump field kappa*beta_ss =
    kappa*eps/gamma_b is real. The sum-mode pair is exactly two uncoupled
    single-downconverter spectra stacked; the difference mode carries the
    shifted resonance at 2 J_a.
    """
    if abs(p.Delta_a - p.J_a) > 1e-12 or abs(p.Delta_b - p.J_b) > 1e-12:
        raise DetuningMismatchError(
            "combined closed forms need Delta_a = J_a and Delta_b = J_b, got "
            f"Delta_a - J_a = {p.Delta_a - p.J_a:.3e}, "
            f"Delta_b - J_b = {p.Delta_b - p.J_b:.3e}")
    eps = _require_equal_real_pumps(p, DetuningMismatchError)
    _require_below(p)
    ga, gb, ja = p.gamma_a, p.gamma_b, p.J_a
    ke = p.kappa * eps
    w2 = omega * omega
    s_xp = 2.0 + 8.0 * ga * gb * ke / ((ga * gb - ke) ** 2 + gb * gb * w2)
    s_yp = 2.0 - 8.0 * ga * gb * ke / ((ga * gb + ke) ** 2 + gb * gb * w2)
    den_m = (gb * gb * (ga * ga + 4.0 * ja * ja - w2) - ke * ke) ** 2 \
        + 4.0 * ga * ga * gb ** 4 * w2
    s_xm = 2.0 + 8.0 * ga * gb * ke * ((ga * gb + ke) ** 2
                                       - gb * gb * (4.0 * ja * ja - w2)) / den_m
    s_ym = 2.0 - 8.0 * ga * gb * ke * ((ga * gb - ke) ** 2
                                       - gb * gb * (4.0 * ja * ja - w2)) / den_m
    return {"S_Xp": s_xp, "S_Yp": s_yp, "S_Xm": s_xm, "S_Ym": s_ym}
