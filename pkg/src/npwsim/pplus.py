"""Positive-P weighted-trajectory solver on the doubled phase space.

Stratonovich system per trajectory (shared measurement noise dW,
per-trajectory fictitious noises dV1, dV2):

    d alpha = -2 g alpha (beta alpha - E[beta alpha]) dt
              + sqrt(g) alpha o (i dV1 + i dV2 + dW)
    d beta  = -2 g beta  (beta alpha - E[beta alpha]) dt
              + sqrt(g) beta  o (-i dV1 + i dV2 + dW)
    d omega = -2 g omega (beta alpha + (beta alpha)^2
              - 2 beta alpha E[beta alpha]) dt + 2 sqrt(g) omega beta alpha o dW

with the mean field E[beta alpha] = sum(w_i b_i a_i)/sum(w_i) over the whole
ensemble. All three variables are multiplicative, so the semi-implicit
midpoint step is taken in log coordinates (Stratonovich calculus commutes
with the change of variables); this avoids spurious sign flips and
overflow of the raw Euler multipliers. Weights become complex; every
``RENORM_INTERVAL`` steps all omega are divided by sum(omega)/n_traj,
an exact no-op on weighted averages.

Ensembles do not raise on divergence; health is read off by
``stats.detect_divergence`` on the weight snapshot.
"""

from __future__ import annotations

from dataclasses import dataclass, replace

import numpy as np

from .config import RENORM_INTERVAL
from .errors import DivergenceError

__all__ = [
    "PPlusEnsemble",
    "init_pplus",
    "step_pplus",
    "pplus_mean_number",
    "pplus_weights",
    "pplus_number_values",
]


@dataclass
class PPlusEnsemble:
    log_alpha: np.ndarray   # complex; alpha_i = exp(log_alpha_i)
    log_beta: np.ndarray
    log_weight: np.ndarray  # complex; omega_i = exp(log_weight_i)
    step: int = 0

    @property
    def n_traj(self) -> int:
        return self.log_alpha.size

    @property
    def alpha(self) -> np.ndarray:
        return np.exp(self.log_alpha)

    @property
    def beta(self) -> np.ndarray:
        return np.exp(self.log_beta)

    @property
    def omega(self) -> np.ndarray:
        return np.exp(self.log_weight)

    def number_product(self) -> np.ndarray:
        """beta_i * alpha_i, the per-trajectory number estimate."""
        return np.exp(self.log_alpha + self.log_beta)

    def is_finite(self) -> bool:
        w = pplus_weights(self)
        return bool(np.isfinite(w).all() and np.isfinite(self.number_product()).all())


def init_pplus(amplitude: float, phase: float, n_traj: int) -> PPlusEnsemble:
    """Delta-distributed coherent ensemble: alpha = a e^{i phi}, beta = alpha*, w = 1."""
    if amplitude < 0:
        raise ValueError(f"amplitude must be >= 0, got {amplitude!r}")
    with np.errstate(divide="ignore"):
        log_r = np.log(amplitude)  # -inf for amplitude 0: exp maps back to 0 exactly
    la = np.full(n_traj, complex(log_r, phase))
    lb = np.full(n_traj, complex(log_r, -phase))
    return PPlusEnsemble(
        log_alpha=la,
        log_beta=lb,
        log_weight=np.zeros(n_traj, dtype=complex),
    )


def pplus_weights(ens: PPlusEnsemble) -> np.ndarray:
    """Complex weights rescaled by the largest magnitude (common factor)."""
    shift = ens.log_weight.real.max()
    return np.exp(ens.log_weight - shift)


def _mean_field(log_w: np.ndarray, ba: np.ndarray) -> complex:
    w = np.exp(log_w - log_w.real.max())
    tot = w.sum()
    if np.abs(tot) == 0.0:
        raise DivergenceError("P+ weight sum vanished")
    return (w * ba).sum() / tot


def step_pplus(ens: PPlusEnsemble, dw: float, dv1: np.ndarray, dv2: np.ndarray,
               dt: float, gamma: float, iterations: int = 3) -> PPlusEnsemble:
    """One joint semi-implicit midpoint step (log coordinates).

    The mean field is re-evaluated from the midpoint iterate, weights
    included, at every iteration.
    """
    if dt <= 0:
        raise ValueError(f"dt must be > 0, got {dt!r}")
    sg = np.sqrt(gamma)
    la0, lb0, lw0 = ens.log_alpha, ens.log_beta, ens.log_weight
    noise_a = sg * (1j * dv1 + 1j * dv2 + dw)
    noise_b = sg * (-1j * dv1 + 1j * dv2 + dw)

    la, lb, lw = la0, lb0, lw0
    dla = dlb = dlw = 0.0
    with np.errstate(over="ignore", invalid="ignore"):
        for _ in range(iterations):
            ba = np.exp(la + lb)
            ef = _mean_field(lw, ba)
            drift = -2.0 * gamma * (ba - ef) * dt
            dla = drift + noise_a
            dlb = drift + noise_b
            dlw = -2.0 * gamma * (ba + ba * ba - 2.0 * ba * ef) * dt \
                + (2.0 * sg * dw) * ba
            la = la0 + 0.5 * dla
            lb = lb0 + 0.5 * dlb
            lw = lw0 + 0.5 * dlw
        la = la0 + dla
        lb = lb0 + dlb
        lw = lw0 + dlw

        step = ens.step + 1
        if step % RENORM_INTERVAL == 0 and np.isfinite(lw).all():
            # divide all omega by sum(omega)/n_traj (common complex rescale)
            shift = lw.real.max()
            total = np.exp(lw - shift).sum() / lw.size
            if np.abs(total) > 0:
                lw = lw - (shift + np.log(total))
    return PPlusEnsemble(log_alpha=la, log_beta=lb, log_weight=lw, step=step)


def pplus_mean_number(ens: PPlusEnsemble) -> tuple[float, float]:
    """(Re, Im) of E_f[beta alpha]; the imaginary part is a diagnostic."""
    ba = ens.number_product()
    if not np.isfinite(ba).all():
        raise DivergenceError("P+ trajectories are non-finite")
    ef = _mean_field(ens.log_weight, ba)
    return float(ef.real), float(ef.imag)


def pplus_number_values(ens: PPlusEnsemble) -> np.ndarray:
    """Per-trajectory beta*alpha for batch statistics."""
    return ens.number_product()
