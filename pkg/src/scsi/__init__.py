"""Self-consistent stochastic interpolants.

Learn a backward transport map that inverts a black-box corruption channel
at the distribution level, using only corrupted samples and sample access to
the channel, plus an exact Gaussian analytic engine for the unit-variance
AWGN case that makes the scheme's convergence behavior numerically testable.
"""

from .channels import ChannelOutput, ChannelSpec, apply_channel, compose
from .datasets import two_moons
from .gaussian import (
    GaussianModel,
    condition_ratio_check,
    em_update,
    gaussian_kl,
    gaussian_score,
    gaussian_w2sq,
    rate_factor,
    scsi_update,
    solution_map_B,
    solution_map_phi,
    transport_cost_T,
    transport_noise_cov,
    wishart_sample,
)
from .metrics import SampleSet, w2_sliced, w2sq_exact
from .nets import (
    OptimizerState,
    Regressor,
    adam_step,
    forward,
    load_checkpoint,
    loss_and_grad,
    make_optimizer,
    make_regressor,
    save_checkpoint,
)
from .schedules import (
    InterpolantSample,
    Schedule,
    combined_residual,
    denoiser_residual,
    drift_residual,
    interpolant_batch,
    make_schedule,
    sample_interpolant,
)
from .training import (
    RunRecord,
    TrainConfig,
    exact_affine_scsi,
    model_drift,
    restore,
    scsi_train,
)
from .transport import (
    TransportConfig,
    TransportDivergedError,
    integrate_ode,
    integrate_sde,
    pushforward,
)

__version__ = "0.1.0"
