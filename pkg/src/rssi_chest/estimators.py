"""Classical and feedback-aided MMSE / MAP channel estimators.

All four estimators act coordinate-wise on a user's pilot observation.  The
MMSE family scales each sample by a real shrinkage coefficient built from a
second moment of the coefficient (the prior variance, or the disclosed gain
when feedback reveals it).  The feedback MAP keeps the phase of the
observation and snaps its modulus to the square root of the disclosed gain.

The array helpers (``shrinkage``, ``mmse_values``, ``map_feedback_values``)
broadcast over leading axes; the Monte-Carlo code and the estimator classes
both go through them so per-sample and batched results are bit-identical.
"""

import math
from dataclasses import dataclass
from enum import Enum

import numpy as np
from sklearn.base import BaseEstimator
from sklearn.exceptions import NotFittedError

from ._validation import (
    DimensionError,
    check_complex_array,
    check_nonnegative_array,
    check_positive,
)
from .channel_model import GainDisclosure, PilotObservation, SystemConfig


class EstimatorTag(str, Enum):
    MMSE_CLASSICAL = "mmse_classical"
    MMSE_FEEDBACK = "mmse_feedback"
    MAP_CLASSICAL = "map_classical"
    MAP_FEEDBACK = "map_feedback"

    @classmethod
    def parse(cls, value):
        if isinstance(value, cls):
            return value
        try:
            return cls(str(value).strip().lower())
        except ValueError:
            names = ", ".join(t.value for t in cls)
            raise ValueError(f"unknown estimator {value!r}; expected one of {names}") from None

    @property
    def uses_feedback(self):
        return self in (EstimatorTag.MMSE_FEEDBACK, EstimatorTag.MAP_FEEDBACK)

    def __str__(self):
        return self.value


@dataclass(frozen=True, eq=False)
class ChannelEstimate:
    values: np.ndarray
    estimator_tag: EstimatorTag

    def __post_init__(self):
        if not np.all(np.isfinite(self.values)):
            raise ValueError("channel estimate contains non-finite values")


@dataclass(frozen=True, eq=False)
class ConditionalSecondMoment:
    """E[|h_ij|^2 | feedback] for each antenna of one user."""

    per_antenna: np.ndarray


def shrinkage(moment, pilot_energy, noise_power):
    """MMSE coefficient sqrt(bP) mu / (bP mu + N0), elementwise in ``mu``."""
    moment = np.asarray(moment, dtype=np.float64)
    return math.sqrt(pilot_energy) * moment / (pilot_energy * moment + noise_power)


def mmse_values(samples, moment, pilot_energy, noise_power):
    return shrinkage(moment, pilot_energy, noise_power) * samples


def unit_phase(samples):
    """``s / |s|`` with the convention ``0 / |0| := 1``."""
    samples = np.asarray(samples, dtype=np.complex128)
    scale = np.maximum(np.abs(samples.real), np.abs(samples.imag))
    nonzero = scale > 0
    scale = np.where(nonzero, scale, 1.0)
    # pre-scaling keeps subnormal samples from losing their modulus
    re, im = samples.real / scale, samples.imag / scale
    mag = np.where(nonzero, np.hypot(re, im), 1.0)
    out = np.empty(samples.shape, dtype=np.complex128)
    out.real = np.where(nonzero, re / mag, 1.0)
    out.imag = np.where(nonzero, im / mag, 0.0)
    return out


def map_feedback_values(samples, known, gains, prior, pilot_energy, noise_power):
    """Feedback MAP on arrays.

    ``known`` is a boolean mask of disclosed antennas, ``gains`` holds the
    disclosed gains (ignored where ``known`` is False), ``prior`` the prior
    variances used on undisclosed antennas.
    """
    classical = mmse_values(samples, prior, pilot_energy, noise_power)
    snapped = np.sqrt(np.where(known, gains, 0.0)) * unit_phase(samples)
    return np.where(known, snapped, classical)


def conditional_second_moment(disclosure: GainDisclosure, prior_variances) -> ConditionalSecondMoment:
    """Disclosed gain where known, prior variance elsewhere."""
    prior = check_nonnegative_array(prior_variances, name="prior_variances")
    if prior.ndim != 1:
        raise DimensionError("prior_variances must be a vector for one user")
    mask = disclosure.mask(prior.size)
    moment = np.where(mask, disclosure.gain_vector(prior.size), prior)
    return ConditionalSecondMoment(moment)


def mmse_estimate(obs: PilotObservation, moment: ConditionalSecondMoment, config: SystemConfig,
                  tag=EstimatorTag.MMSE_FEEDBACK) -> ChannelEstimate:
    s = check_complex_array(obs.samples, config.n_antennas, ndim=1)
    mu = np.asarray(moment.per_antenna, dtype=np.float64)
    if mu.shape != s.shape:
        raise DimensionError(f"moment has shape {mu.shape}, expected {s.shape}")
    values = mmse_values(s, mu, config.pilot_energy, config.noise_power)
    return ChannelEstimate(values, EstimatorTag.parse(tag))


def map_classical(obs: PilotObservation, config: SystemConfig) -> ChannelEstimate:
    # Identical arithmetic to mmse_estimate with the prior as moment.
    s = check_complex_array(obs.samples, config.n_antennas, ndim=1)
    values = mmse_values(s, config.prior[obs.user], config.pilot_energy, config.noise_power)
    return ChannelEstimate(values, EstimatorTag.MAP_CLASSICAL)


def map_feedback(obs: PilotObservation, disclosure: GainDisclosure, config: SystemConfig) -> ChannelEstimate:
    s = check_complex_array(obs.samples, config.n_antennas, ndim=1)
    n = config.n_antennas
    values = map_feedback_values(
        s,
        disclosure.mask(n),
        np.nan_to_num(disclosure.gain_vector(n)),
        config.prior[obs.user],
        config.pilot_energy,
        config.noise_power,
    )
    return ChannelEstimate(values, EstimatorTag.MAP_FEEDBACK)


def estimate(tag, obs: PilotObservation, disclosure: GainDisclosure, config: SystemConfig) -> ChannelEstimate:
    """Dispatch on ``tag``; classical estimators ignore ``disclosure``."""
    tag = EstimatorTag.parse(tag)
    prior = config.prior[obs.user]
    if tag is EstimatorTag.MMSE_CLASSICAL:
        return mmse_estimate(obs, ConditionalSecondMoment(prior), config, tag)
    if tag is EstimatorTag.MMSE_FEEDBACK:
        return mmse_estimate(obs, conditional_second_moment(disclosure, prior), config, tag)
    if tag is EstimatorTag.MAP_CLASSICAL:
        return map_classical(obs, config)
    return map_feedback(obs, disclosure, config)


# sklearn-style estimators --------------------------------------------------


class _PilotEstimator(BaseEstimator):
    """Shared parameter handling for the batch estimators.

    Observations ``S`` are complex arrays of shape ``(n_samples, n_antennas)``.
    Disclosed gains are passed as a real array of the same shape with NaN
    marking antennas whose gain is unknown.
    """

    tag = None

    def __init__(self, pilot_energy=1.0, noise_power=1.0, prior_variance=1.0):
        self.pilot_energy = pilot_energy
        self.noise_power = noise_power
        self.prior_variance = prior_variance

    def fit(self, S, y=None):
        S = check_complex_array(S, ndim=2)
        check_positive(self.pilot_energy, "pilot_energy")
        check_positive(self.noise_power, "noise_power")
        n = S.shape[1]
        prior = check_nonnegative_array(self.prior_variance, name="prior_variance")
        if prior.ndim == 0:
            prior = np.full(n, float(prior))
        if prior.shape != (n,):
            raise DimensionError(f"prior_variance has shape {prior.shape}, expected ({n},)")
        self.n_features_in_ = n
        self.prior_variances_ = prior
        self.coef_ = shrinkage(prior, self.pilot_energy, self.noise_power)
        return self

    def _check_fitted(self, S):
        if not hasattr(self, "coef_"):
            raise NotFittedError(f"{type(self).__name__} is not fitted yet; call fit first")
        return check_complex_array(S, self.n_features_in_, ndim=2)

    def _check_gains(self, gains, shape):
        if gains is None:
            return np.zeros(shape, dtype=bool), np.zeros(shape)
        gains = check_nonnegative_array(gains, shape=shape, name="gains", allow_nan=True)
        known = ~np.isnan(gains)
        return known, np.where(known, gains, 0.0)

    def score(self, S, H, gains=None):
        """Negative mean over samples of the summed squared error."""
        H = check_complex_array(H, self.n_features_in_, ndim=2)
        err = np.abs(self.predict(S, gains) - H) ** 2
        return -float(np.mean(err.sum(axis=1)))


class ClassicalMMSE(_PilotEstimator):
    tag = EstimatorTag.MMSE_CLASSICAL

    def predict(self, S, gains=None):
        S = self._check_fitted(S)
        return self.coef_ * S


class ClassicalMAP(ClassicalMMSE):
    tag = EstimatorTag.MAP_CLASSICAL


class FeedbackMMSE(_PilotEstimator):
    tag = EstimatorTag.MMSE_FEEDBACK

    def predict(self, S, gains=None):
        S = self._check_fitted(S)
        known, g = self._check_gains(gains, S.shape)
        moment = np.where(known, g, self.prior_variances_)
        return mmse_values(S, moment, self.pilot_energy, self.noise_power)


class FeedbackMAP(_PilotEstimator):
    tag = EstimatorTag.MAP_FEEDBACK

    def predict(self, S, gains=None):
        S = self._check_fitted(S)
        known, g = self._check_gains(gains, S.shape)
        return map_feedback_values(
            S, known, g, self.prior_variances_, self.pilot_energy, self.noise_power
        )


_CLASSES = {
    EstimatorTag.MMSE_CLASSICAL: ClassicalMMSE,
    EstimatorTag.MMSE_FEEDBACK: FeedbackMMSE,
    EstimatorTag.MAP_CLASSICAL: ClassicalMAP,
    EstimatorTag.MAP_FEEDBACK: FeedbackMAP,
}


def make_estimator(tag, **params):
    return _CLASSES[EstimatorTag.parse(tag)](**params)
