"""Property checks run by ``rssi-chest verify``.

Each check returns a :class:`CheckResult`; tolerances are three standard
errors unless stated otherwise.
"""

import math
from dataclasses import dataclass

import numpy as np

from .channel_model import SystemConfig, draw_trials
from .estimators import EstimatorTag, map_feedback_values, mmse_values, shrinkage
from .metrics import (
    MseEstimate,
    expected_conditional_mse,
    mse_lower_bound,
    squared_errors,
)

MONOTONE_SNRS = (-20.0, 0.0, 20.0)
LOW_SNR, HIGH_SNR = -40.0, 40.0
LOW_RATIO_RANGE = (1.9, 2.1)
HIGH_RATIO_RANGE = (0.45, 0.55)


@dataclass(frozen=True)
class CheckResult:
    name: str
    passed: bool
    detail: str

    def line(self):
        return f"[{'PASS' if self.passed else 'FAIL'}] {self.name}: {self.detail}"


def check_coincidence(config, h, w, user=0):
    """Classical MMSE, classical MAP and m = 0 feedback estimators agree bit for bit."""
    prior = config.prior[user]
    s = math.sqrt(config.pilot_energy) * h + math.sqrt(config.noise_power) * w
    no_gain = np.zeros(s.shape, dtype=bool)
    a = shrinkage(prior, config.pilot_energy, config.noise_power) * s
    b = mmse_values(s, np.where(no_gain, 0.0, prior), config.pilot_energy, config.noise_power)
    c = map_feedback_values(s, no_gain, 0.0, prior, config.pilot_energy, config.noise_power)
    errs = [
        squared_errors(tag, 0, config, h, w, user)
        for tag in (EstimatorTag.MMSE_CLASSICAL, EstimatorTag.MMSE_FEEDBACK,
                    EstimatorTag.MAP_CLASSICAL, EstimatorTag.MAP_FEEDBACK)
    ]
    same = np.array_equal(a, b) and np.array_equal(a, c)
    same = same and all(np.array_equal(errs[0], e) for e in errs[1:])
    return CheckResult(
        "m=0 coincidence",
        bool(same),
        f"{s.shape[0]} trials, estimates and squared errors bit-identical = {bool(same)}",
    )


def check_monotonicity(config, h, w, snr_db, user=0):
    cfg = config.with_snr(snr_db)
    mses = [
        MseEstimate.from_samples(squared_errors(EstimatorTag.MMSE_FEEDBACK, m, cfg, h, w, user))
        for m in range(config.n_antennas + 1)
    ]
    worst = math.inf
    for prev, nxt in zip(mses, mses[1:]):
        combined = math.hypot(prev.std_error, nxt.std_error)
        slack = prev.mean - nxt.mean + 3 * combined
        worst = min(worst, slack)
    means = ", ".join(f"{x.mean:.6g}" for x in mses)
    return CheckResult(
        f"monotone in m at {snr_db:g} dB", worst >= 0, f"delta(m) = [{means}]"
    )


def check_lower_bound(config, h, w, snr_db, user=0):
    cfg = config.with_snr(snr_db)
    bound = mse_lower_bound(cfg, user).value
    worst = math.inf
    for m in range(config.n_antennas + 1):
        mse = MseEstimate.from_samples(squared_errors(EstimatorTag.MMSE_FEEDBACK, m, cfg, h, w, user))
        worst = min(worst, (mse.mean - bound) / mse.std_error if mse.std_error else math.inf)
    return CheckResult(
        f"lower bound at {snr_db:g} dB",
        worst > -3,
        f"bound = {bound:.9g}, min (delta - bound)/SE = {worst:.3f}",
    )


def check_closed_form(config, h, w, snr_db, user=0):
    """Monte-Carlo MSE vs the trial average of the conditional MSE."""
    cfg = config.with_snr(snr_db)
    worst = 0.0
    for m in range(config.n_antennas + 1):
        diff = squared_errors(EstimatorTag.MMSE_FEEDBACK, m, cfg, h, w, user) - expected_conditional_mse(m, cfg, h, user)
        se = float(np.std(diff, ddof=1)) / math.sqrt(diff.size)
        worst = max(worst, abs(float(diff.mean())) / se)
    return CheckResult(
        f"closed-form agreement at {snr_db:g} dB",
        worst < 3,
        f"max |MC - closed form| / SE = {worst:.3f}",
    )


def check_ratio(config, h, w, snr_db, bounds, user=0):
    cfg = config.with_snr(snr_db)
    fb = squared_errors(EstimatorTag.MAP_FEEDBACK, config.n_antennas, cfg, h, w, user).mean()
    base = squared_errors(EstimatorTag.MAP_CLASSICAL, 0, cfg, h, w, user).mean()
    ratio = fb / base
    lo, hi = bounds
    return CheckResult(
        f"map ratio at {snr_db:g} dB",
        lo <= ratio <= hi,
        f"ratio = {ratio:.4f}, expected in [{lo}, {hi}]",
    )


def run_checks(seed, n_trials=100_000, config: SystemConfig = None, user=0, n_workers=1):
    config = config or SystemConfig.identity_prior()
    h, w = draw_trials(config, n_trials, seed, user, n_workers)
    results = [check_coincidence(config.with_snr(0.0), h, w, user)]
    for snr in MONOTONE_SNRS:
        results.append(check_monotonicity(config, h, w, snr, user))
        results.append(check_lower_bound(config, h, w, snr, user))
        results.append(check_closed_form(config, h, w, snr, user))
    results.append(check_ratio(config, h, w, LOW_SNR, LOW_RATIO_RANGE, user))
    results.append(check_ratio(config, h, w, HIGH_SNR, HIGH_RATIO_RANGE, user))
    return results
