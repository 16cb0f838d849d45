"""MIMO channel estimation with receive-power (RSSI) feedback."""

__version__ = "0.1.0"

from .channel_model import (  # noqa: E402
    ChannelRealization,
    GainDisclosure,
    PilotObservation,
    PowerAllocation,
    RssiSequence,
    SystemConfig,
    compute_rssi,
    disclose_gains,
    observe_pilots,
    sample_channel,
)
from .estimators import (  # noqa: E402
    ChannelEstimate,
    ClassicalMAP,
    ClassicalMMSE,
    ConditionalSecondMoment,
    EstimatorTag,
    FeedbackMAP,
    FeedbackMMSE,
    conditional_second_moment,
    make_estimator,
    map_classical,
    map_feedback,
    mmse_estimate,
)
from .metrics import (  # noqa: E402
    LowerBoundValue,
    MseEstimate,
    asymptotic_ratio,
    conditional_mse,
    empirical_mse,
    mse_lower_bound,
    relative_reduction,
)
from .experiment import SweepReport, SweepSpec, emit_report, run_sweep  # noqa: E402
