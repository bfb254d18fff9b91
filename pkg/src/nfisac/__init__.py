"""Near-field ultra-wideband ISAC simulation library.

Layers, bottom to top: ``core`` (geometry, steering, channels),
``codebook`` / ``ttd`` (analog beams), ``combiner`` (digital subcarrier
filters), ``radar`` (OFDM sensing chain), ``harness`` (Monte Carlo
evaluation), ``config`` / ``cli`` (run orchestration).
"""

from .core import (
    C_MPS,
    ArrayConfig,
    ChannelParams,
    FrequencyGrid,
    PolarPoint,
    RegionOfInterest,
    beam_gain,
    beamformed_response,
    element_positions,
    ff_steering_matrix,
    fraunhofer_distance,
    nf_steering_matrix,
    steering_matrix,
    synthesize_user_channel,
)
from .codebook import (
    Codebook,
    Codeword,
    PgdParams,
    beam_broadening_codebook,
    fairness_codebook,
    ff_codebook,
    focus_codeword,
    load_codebook,
    nf_polar_codebook,
    partition_roi,
    pgd_codeword,
    point_gains,
    polar_focal_distances,
    project_unit_modulus,
    save_codebook,
    smooth_min_objective,
    steering_cache,
)
from .combiner import (
    Combiner,
    EsMatrices,
    EsWeighting,
    combined_combiner,
    crb_min_combiner,
    delay_crb,
    delay_profile,
    energy_spread,
    es_combiner,
    es_matrices,
    flat_combiner,
    mrc_combiner,
    peak_snr,
)
from .radar import (
    DelayDopplerMap,
    Detection,
    DetectionReport,
    Frame,
    Gate,
    SensingTarget,
    calibrate_threshold,
    channel_quotient,
    detect,
    estimate_target,
    export_map_csv,
    generate_frame,
    range_doppler_map,
    synthesize_echo,
)
from .ttd import TtdConfig, ideal_ttd_weights, subarray_ttd_weights
from .harness import (
    CoverageMap,
    MetricsReport,
    Scenario,
    SensingRig,
    TrialResult,
    build_codebook,
    coverage_map,
    detection_metrics,
    e2e_throughput,
    run_trials,
    sample_target,
    sensing_trial,
    size_sweep,
    spectral_efficiency,
)
from .config import RunConfig, desk_preset, paper_preset, parse_config, resolve_config

__version__ = "0.1.0"
