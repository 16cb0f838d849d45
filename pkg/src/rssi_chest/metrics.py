"""Analytic and Monte-Carlo mean-squared-error quantities."""

import math
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass

import numpy as np
from scipy import integrate

from ._validation import DimensionError, check_count, check_index
from .channel_model import BLOCK_TRIALS, SystemConfig, draw_trials
from .estimators import (
    ConditionalSecondMoment,
    EstimatorTag,
    map_feedback_values,
    mmse_values,
)

QUAD_TOLERANCE = 1e-8


@dataclass(frozen=True)
class MseEstimate:
    mean: float
    std_error: float
    n_trials: int

    @classmethod
    def from_samples(cls, errors):
        errors = np.asarray(errors, dtype=np.float64)
        n = errors.size
        if n == 0:
            raise ValueError("no trials")
        sd = float(np.std(errors, ddof=1)) if n > 1 else 0.0
        return cls(float(np.mean(errors)), sd / math.sqrt(n), n)


@dataclass(frozen=True)
class LowerBoundValue:
    value: float
    quadrature_error: float
    per_antenna: tuple = ()


def conditional_mse(moment: ConditionalSecondMoment, config: SystemConfig) -> float:
    """Sum over antennas of N0 mu / (bP mu + N0)."""
    mu = np.asarray(moment.per_antenna, dtype=np.float64)
    if mu.shape != (config.n_antennas,):
        raise DimensionError(f"moment has shape {mu.shape}, expected ({config.n_antennas},)")
    terms = config.noise_power * mu / (config.pilot_energy * mu + config.noise_power)
    return math.fsum(terms)


def squared_errors(tag, m, config: SystemConfig, h, w, user=0, n_workers=1):
    """Per-trial ``sum_i |h_hat_i - h_i|^2`` for pre-drawn channels and noise.

    ``h`` and ``w`` come from :func:`~rssi_chest.channel_model.draw_trials`;
    the SNR is whatever ``config`` carries.  The first ``m`` antennas have
    their gains disclosed to the feedback estimators.
    """
    tag = EstimatorTag.parse(tag)
    m = check_count(m, "m")
    if m > config.n_antennas:
        raise ValueError(f"m = {m} exceeds the number of antennas {config.n_antennas}")
    h = np.asarray(h)
    w = np.asarray(w)
    prior = config.prior[check_index(user, config.n_users)]
    known = np.arange(config.n_antennas) < m
    bp, n0 = config.pilot_energy, config.noise_power
    out = np.empty(h.shape[0])

    def run(lo):
        hb, wb = h[lo : lo + BLOCK_TRIALS], w[lo : lo + BLOCK_TRIALS]
        s = math.sqrt(bp) * hb + math.sqrt(n0) * wb
        gains = hb.real**2 + hb.imag**2
        if tag is EstimatorTag.MMSE_FEEDBACK:
            est = mmse_values(s, np.where(known, gains, prior), bp, n0)
        elif tag is EstimatorTag.MAP_FEEDBACK:
            est = map_feedback_values(s, known, gains, prior, bp, n0)
        else:
            est = mmse_values(s, prior, bp, n0)
        diff = est - hb
        out[lo : lo + BLOCK_TRIALS] = (diff.real**2 + diff.imag**2).sum(axis=1)

    starts = range(0, h.shape[0], BLOCK_TRIALS)
    if n_workers > 1:
        with ThreadPoolExecutor(max_workers=n_workers) as pool:
            list(pool.map(run, starts))
    else:
        for lo in starts:
            run(lo)
    return out


def empirical_mse(tag, m, snr_db, config: SystemConfig, n_trials, seed, user=0, n_workers=1) -> MseEstimate:
    """Monte-Carlo estimate of the real MSE of one estimator.

    Channel and noise draws depend only on ``(seed, user, trial)``, so calls
    that differ in ``tag``, ``m`` or ``snr_db`` see common random numbers.
    """
    tag = EstimatorTag.parse(tag)
    cfg = config.with_snr(snr_db)
    h, w = draw_trials(cfg, n_trials, seed, user=user, n_workers=n_workers)
    return MseEstimate.from_samples(squared_errors(tag, m, cfg, h, w, user, n_workers))


def expected_conditional_mse(m, config: SystemConfig, h, user=0):
    """Per-trial conditional MSE of the feedback MMSE given the disclosed gains.

    Averaging this over trials is the closed-form route to the real MSE.
    """
    prior = config.prior[user]
    known = np.arange(config.n_antennas) < m
    mu = np.where(known, h.real**2 + h.imag**2, prior)
    n0 = config.noise_power
    return (n0 * mu / (config.pilot_energy * mu + n0)).sum(axis=1)


def _expected_shrunk_gain(a):
    """E[t / (a t + 1)] for t ~ Exp(1), by quadrature in u = exp(-t)."""

    def integrand(u):
        t = -math.log(u) if u > 0 else math.inf
        if math.isinf(t):
            return 1.0 / a if a > 0 else math.inf
        return t / (a * t + 1.0)

    value, err = integrate.quad(integrand, 0.0, 1.0, epsabs=1e-11, epsrel=1e-12, limit=400)
    return value, err


def mse_lower_bound(config: SystemConfig, user=0) -> LowerBoundValue:
    """MSE floor reached when every gain is known exactly.

    Each antenna contributes ``E[N0 g / (bP g + N0)]`` with ``g`` exponential
    of mean ``sigma^2``.  Writing ``g = sigma^2 t`` and ``t = -ln u`` maps the
    integral onto ``[0, 1]`` with a bounded integrand for positive SNR.
    """
    user = check_index(user, config.n_users)
    values, errors = [], []
    for var in config.prior[user].tolist():
        if var == 0:
            values.append(0.0)
            errors.append(0.0)
            continue
        a = config.pilot_energy * var / config.noise_power
        v, e = _expected_shrunk_gain(a)
        values.append(var * v)
        errors.append(var * e)
    total_err = math.fsum(errors)
    if total_err > QUAD_TOLERANCE:
        raise ArithmeticError(
            f"quadrature error estimate {total_err:.3g} exceeds {QUAD_TOLERANCE:g}"
        )
    return LowerBoundValue(math.fsum(values), total_err, tuple(values))


def relative_reduction(baseline: MseEstimate, improved: MseEstimate) -> float:
    """Percentage MSE reduction of ``improved`` relative to ``baseline``."""
    if baseline.mean == 0:
        raise ZeroDivisionError("baseline MSE is zero")
    return (baseline.mean - improved.mean) / baseline.mean * 100.0


def reduction_std_error(baseline_errors, improved_errors):
    """Standard error of the relative reduction (percent) from paired trials.

    Delta method for the ratio of means; pairing lets common random numbers
    cancel in the numerator.
    """
    b = np.asarray(baseline_errors, dtype=np.float64)
    c = np.asarray(improved_errors, dtype=np.float64)
    if b.shape != c.shape or b.size < 2:
        raise ValueError("need paired samples of equal length >= 2")
    ratio = c.mean() / b.mean()
    resid = c - ratio * b
    return 100.0 * float(np.std(resid, ddof=1)) / math.sqrt(b.size) / b.mean()


def asymptotic_ratio(tag, snr_db, config: SystemConfig, n_trials, seed, user=0, n_workers=1) -> float:
    """MSE of the feedback MAP with all gains known over the classical MAP MSE."""
    tag = EstimatorTag.parse(tag)
    if tag is not EstimatorTag.MAP_FEEDBACK:
        raise ValueError("asymptotic_ratio is defined for map_feedback only")
    n = config.n_antennas
    fb = empirical_mse(tag, n, snr_db, config, n_trials, seed, user, n_workers)
    base = empirical_mse(EstimatorTag.MAP_CLASSICAL, 0, snr_db, config, n_trials, seed, user, n_workers)
    return fb.mean / base.mean
