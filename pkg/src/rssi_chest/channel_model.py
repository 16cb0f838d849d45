"""System configuration and random generation of channels, pilots and feedback.

Random streams
--------------
Every draw comes from a Philox (counter-based) generator keyed by
``SeedSequence(seed, spawn_key=key)``.  The key names the stream:

* ``(0,)``                 -- :func:`sample_channel`
* ``(1, user)``            -- :func:`observe_pilots`
* ``(2, user, block)``     -- Monte-Carlo trials, ``BLOCK_TRIALS`` per block

Trial ``t`` always lives in block ``t // BLOCK_TRIALS`` at row
``t % BLOCK_TRIALS``, and blocks are generated at full size before
truncation, so a trial's draws depend only on ``(seed, user, t)`` and never
on ``n_trials`` or on how blocks are scheduled across workers.
"""

import hashlib
import json
import math
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field, replace
from typing import Optional

import numpy as np

from ._validation import (
    DimensionError,
    check_count,
    check_index,
    check_nonnegative_array,
    check_positive,
)

BLOCK_TRIALS = 1024

_CHANNEL_STREAM = 0
_PILOT_STREAM = 1
_TRIAL_STREAM = 2


def make_rng(seed, *key):
    """Return the Philox generator for stream ``key`` under master ``seed``."""
    if isinstance(seed, np.random.SeedSequence):
        seq = np.random.SeedSequence(
            seed.entropy, spawn_key=tuple(seed.spawn_key) + tuple(key)
        )
    else:
        seed = check_count(seed, "seed")
        seq = np.random.SeedSequence(seed, spawn_key=tuple(key))
    return np.random.Generator(np.random.Philox(seq))


def complex_normal(rng, shape, variance=1.0):
    """Circularly-symmetric CN(0, variance) draws: real and imaginary parts
    are independent N(0, variance / 2)."""
    parts = rng.standard_normal((*shape, 2))
    z = parts[..., 0] + 1j * parts[..., 1]
    return z * np.sqrt(np.asarray(variance, dtype=np.float64) / 2.0)


def snr_to_linear(snr_db):
    return 10.0 ** (float(snr_db) / 10.0)


@dataclass(frozen=True)
class SystemConfig:
    """Dimensions, pilot energy, noise power and the per-user channel prior.

    ``pilot_energy`` is the product of pilot count and pilot power, so the
    training SNR is ``pilot_energy / noise_power``.  ``prior_variances[j][i]``
    is the variance of the coefficient from antenna ``i`` to user ``j``.
    ``slots_per_frame`` and ``symbols_per_slot`` are descriptive metadata only.
    """

    n_antennas: int
    n_users: int
    pilot_energy: float
    noise_power: float
    prior_variances: tuple
    slots_per_frame: Optional[int] = None
    symbols_per_slot: Optional[int] = None

    def __post_init__(self):
        check_count(self.n_antennas, "n_antennas", minimum=1)
        check_count(self.n_users, "n_users", minimum=1)
        object.__setattr__(
            self, "pilot_energy", check_positive(self.pilot_energy, "pilot_energy")
        )
        object.__setattr__(
            self, "noise_power", check_positive(self.noise_power, "noise_power")
        )
        prior = check_nonnegative_array(
            self.prior_variances,
            shape=(self.n_users, self.n_antennas),
            name="prior_variances",
        )
        object.__setattr__(
            self, "prior_variances", tuple(tuple(float(v) for v in row) for row in prior)
        )
        for name in ("slots_per_frame", "symbols_per_slot"):
            if getattr(self, name) is not None:
                check_count(getattr(self, name), name, minimum=1)

    @classmethod
    def identity_prior(cls, n_antennas=4, n_users=4, snr_db=0.0, noise_power=1.0):
        """Configuration with D_j = I for every user."""
        return cls(
            n_antennas=n_antennas,
            n_users=n_users,
            pilot_energy=noise_power * snr_to_linear(snr_db),
            noise_power=noise_power,
            prior_variances=np.ones((n_users, n_antennas)),
        )

    @property
    def prior(self):
        return np.array(self.prior_variances, dtype=np.float64)

    @property
    def snr(self):
        return self.pilot_energy / self.noise_power

    @property
    def snr_db(self):
        return 10.0 * math.log10(self.snr)

    def with_snr(self, snr_db):
        """Same configuration with the pilot energy set for ``snr_db``."""
        return replace(self, pilot_energy=self.noise_power * snr_to_linear(snr_db))

    def as_dict(self):
        return {
            "n_antennas": self.n_antennas,
            "n_users": self.n_users,
            "pilot_energy": self.pilot_energy,
            "noise_power": self.noise_power,
            "prior_variances": [list(row) for row in self.prior_variances],
            "slots_per_frame": self.slots_per_frame,
            "symbols_per_slot": self.symbols_per_slot,
        }

    def digest(self):
        payload = json.dumps(self.as_dict(), sort_keys=True, separators=(",", ":"))
        return hashlib.sha256(payload.encode()).hexdigest()[:16]


@dataclass(frozen=True, eq=False)
class ChannelRealization:
    """Channel coefficients ``h[j, i]`` (user ``j``, antenna ``i``) and gains."""

    coefficients: np.ndarray
    gains: np.ndarray = field(init=False)

    def __post_init__(self):
        h = np.asarray(self.coefficients, dtype=np.complex128)
        if h.ndim != 2:
            raise DimensionError(f"coefficients must be (n_users, n_antennas), got {h.shape}")
        object.__setattr__(self, "coefficients", h)
        object.__setattr__(self, "gains", h.real**2 + h.imag**2)

    @property
    def n_users(self):
        return self.coefficients.shape[0]

    @property
    def n_antennas(self):
        return self.coefficients.shape[1]


@dataclass(frozen=True, eq=False)
class PilotObservation:
    """Training observation ``s_j`` of one user."""

    samples: np.ndarray
    user: int = 0


@dataclass(frozen=True, eq=False)
class PowerAllocation:
    """Per-antenna transmit powers ``P_i(n)``, one row per time slot."""

    per_slot_powers: np.ndarray

    def __post_init__(self):
        p = np.atleast_2d(np.asarray(self.per_slot_powers, dtype=np.float64))
        if p.ndim != 2:
            raise DimensionError("per_slot_powers must be (m, n_antennas)")
        check_nonnegative_array(p, name="per_slot_powers")
        object.__setattr__(self, "per_slot_powers", p)

    @property
    def n_slots(self):
        return self.per_slot_powers.shape[0]


@dataclass(frozen=True, eq=False)
class RssiSequence:
    values: np.ndarray
    user: int = 0


@dataclass(frozen=True)
class GainDisclosure:
    """Antenna indices (0-based) whose gains are known, with the gain values."""

    known_indices: tuple = ()
    known_gains: dict = field(default_factory=dict)

    def __post_init__(self):
        if tuple(sorted(self.known_gains)) != tuple(sorted(self.known_indices)):
            raise ValueError("known_gains keys must match known_indices")
        if len(set(self.known_indices)) != len(self.known_indices):
            raise ValueError("known_indices must be distinct")
        for g in self.known_gains.values():
            if not g >= 0:
                raise ValueError("disclosed gains must be non-negative")

    @property
    def m(self):
        return len(self.known_indices)

    def mask(self, n_antennas):
        """Boolean vector, True where the gain is known."""
        out = np.zeros(n_antennas, dtype=bool)
        for i in self.known_indices:
            if not 0 <= i < n_antennas:
                raise DimensionError(f"disclosed index {i} outside 0..{n_antennas - 1}")
            out[i] = True
        return out

    def gain_vector(self, n_antennas):
        """Gains as a length-N vector with NaN for undisclosed antennas."""
        out = np.full(n_antennas, np.nan)
        mask = self.mask(n_antennas)
        out[mask] = [self.known_gains[i] for i in np.flatnonzero(mask)]
        return out


def sample_channel(config: SystemConfig, seed) -> ChannelRealization:
    """Draw ``h_ij ~ CN(0, sigma_ij^2)`` independently for every user and antenna."""
    rng = make_rng(seed, _CHANNEL_STREAM)
    h = complex_normal(rng, (config.n_users, config.n_antennas), config.prior)
    return ChannelRealization(h)


def observe_pilots(channel: ChannelRealization, user, config: SystemConfig, seed) -> PilotObservation:
    """Noisy training observation ``s = sqrt(pilot_energy) h_j + z``."""
    _check_channel(channel, config)
    user = check_index(user, config.n_users)
    rng = make_rng(seed, _PILOT_STREAM, user)
    noise = complex_normal(rng, (config.n_antennas,), config.noise_power)
    s = math.sqrt(config.pilot_energy) * channel.coefficients[user] + noise
    return PilotObservation(s, user)


def compute_rssi(channel: ChannelRealization, user, allocation: PowerAllocation, config: SystemConfig) -> RssiSequence:
    """Noiseless receive-power feedback ``r_n = sum_i g_ij P_i(n) + N0``."""
    _check_channel(channel, config)
    user = check_index(user, config.n_users)
    p = allocation.per_slot_powers
    if p.shape[1] != config.n_antennas:
        raise DimensionError(
            f"allocation rows have {p.shape[1]} entries, expected {config.n_antennas}"
        )
    g = channel.gains[user]
    values = np.array([math.fsum(row * g) + config.noise_power for row in p])
    return RssiSequence(values, user)


def disclose_gains(channel: ChannelRealization, user, m) -> GainDisclosure:
    """Reveal the exact gains of antennas ``0 .. m-1`` of ``user``.

    One feedback sample is assumed to reconstruct one gain perfectly, in
    natural antenna order.
    """
    user = check_index(user, channel.n_users)
    m = check_count(m, "m")
    if m > channel.n_antennas:
        raise ValueError(f"m = {m} exceeds the number of antennas {channel.n_antennas}")
    indices = tuple(range(m))
    gains = {i: float(channel.gains[user, i]) for i in indices}
    return GainDisclosure(indices, gains)


def draw_trials(config: SystemConfig, n_trials, seed, user=0, n_workers=1):
    """Channel and unit-variance pilot noise for ``n_trials`` independent trials.

    Returns ``(h, w)``, both complex arrays of shape ``(n_trials, N)`` for the
    given user; the pilot observation of a trial is
    ``sqrt(pilot_energy) * h + sqrt(noise_power) * w``.  Draws do not depend
    on the SNR, so sweeps reuse them as common random numbers.
    """
    n_trials = check_count(n_trials, "n_trials", minimum=1)
    user = check_index(user, config.n_users)
    n = config.n_antennas
    variances = config.prior[user]
    h = np.empty((n_trials, n), dtype=np.complex128)
    w = np.empty((n_trials, n), dtype=np.complex128)
    n_blocks = -(-n_trials // BLOCK_TRIALS)

    def fill(block):
        rng = make_rng(seed, _TRIAL_STREAM, user, block)
        hb = complex_normal(rng, (BLOCK_TRIALS, n), variances)
        wb = complex_normal(rng, (BLOCK_TRIALS, n))
        lo = block * BLOCK_TRIALS
        hi = min(lo + BLOCK_TRIALS, n_trials)
        h[lo:hi] = hb[: hi - lo]
        w[lo:hi] = wb[: hi - lo]

    if n_workers > 1 and n_blocks > 1:
        with ThreadPoolExecutor(max_workers=n_workers) as pool:
            list(pool.map(fill, range(n_blocks)))
    else:
        for b in range(n_blocks):
            fill(b)
    return h, w


def _check_channel(channel, config):
    if channel.coefficients.shape != (config.n_users, config.n_antennas):
        raise DimensionError(
            f"channel shape {channel.coefficients.shape} does not match "
            f"({config.n_users}, {config.n_antennas})"
        )
