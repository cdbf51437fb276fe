"""albeam: plane-wave ultrasound beamforming with human-steered training.

The package simulates single-angle plane-wave acquisitions, beamforms them
with classical methods (delay-and-sum, filtered delay-multiply-and-sum,
minimum-variance, coherence-factor weighting) and with a small learned
apodization network, and runs the selection loop through which an operator's
image choices become training targets.
"""

__version__ = "0.1.0"

from .exceptions import (AlbeamError, BadRoundError, ConfigurationError,
                         ContractViolationError, IntegrityError,
                         OutOfWindowError, SequencingError,
                         TrainingAbortedError, UnboundedFwhmError,
                         UnknownCandidateError)
from .sim import (PhantomSpec, ProbeConfig, RFFrame, desk_probe,
                  load_phantom_file, paper_scale_probe, pulse_sigma,
                  save_phantom_file, synthesize_frame, transmit_pulse)
from .geometry import DelayedTensor, ImageGrid, compute_delay, delay_compensate
from .beamformers import (BeamformedData, GcfConfig, Method, MvdrConfig, das,
                          fdmas, fdmas_filter_taps, fdmas_pair_sum, gcf,
                          gcf_map, mvdr, mvdr_weights)
from .postprocess import (DEFAULT_DYNAMIC_RANGE, BModeImage, envelope,
                          log_compress, parse_png, render_png, to_gray_u8)
from .metrics import (ContrastResult, MetricsReport, RegionSpec,
                      contrast_metrics, fwhm)
from .rfbin import read_rfbin, write_rfbin
from .neural import (Adam, ApodWeights, TrainConfig, UNet, UNetConfig,
                     beamform_head, checkpoint_checksum, desk_unet_config,
                     full_unet_config, load_checkpoint, model_weights,
                     save_checkpoint, train_step, weighted_channel_sum)
from .session import (ActiveSession, Candidate, CandidateSet, FrameSource,
                      SessionConfig, SessionStats, desk_session_config,
                      replay_log, round_permutation, round_tokens,
                      selection_criteria_text, stats_from_log)
from .config import load_session_config, session_config_from_dict
from .api import ApiServer

__all__ = [
    "ActiveSession", "Adam", "AlbeamError", "ApiServer", "ApodWeights",
    "BadRoundError", "BeamformedData", "BModeImage", "Candidate",
    "CandidateSet", "ConfigurationError", "ContractViolationError",
    "ContrastResult", "DEFAULT_DYNAMIC_RANGE", "DelayedTensor", "FrameSource",
    "GcfConfig", "ImageGrid", "IntegrityError", "Method", "MetricsReport",
    "MvdrConfig", "OutOfWindowError", "PhantomSpec", "ProbeConfig",
    "RegionSpec", "RFFrame", "SequencingError", "SessionConfig",
    "SessionStats", "TrainConfig", "TrainingAbortedError", "UNet",
    "UNetConfig", "UnboundedFwhmError", "UnknownCandidateError",
    "beamform_head", "checkpoint_checksum", "compute_delay",
    "contrast_metrics", "das", "delay_compensate", "desk_probe",
    "desk_session_config", "desk_unet_config", "envelope", "fdmas",
    "fdmas_filter_taps", "fdmas_pair_sum", "full_unet_config", "fwhm", "gcf",
    "gcf_map", "load_checkpoint", "load_phantom_file", "load_session_config",
    "log_compress", "model_weights", "mvdr", "mvdr_weights",
    "paper_scale_probe", "parse_png", "pulse_sigma", "read_rfbin",
    "render_png", "replay_log", "round_permutation", "round_tokens",
    "save_checkpoint", "save_phantom_file", "selection_criteria_text",
    "session_config_from_dict", "stats_from_log", "synthesize_frame",
    "to_gray_u8", "train_step", "transmit_pulse", "weighted_channel_sum",
    "write_rfbin",
]
