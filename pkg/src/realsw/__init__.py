"""Slepian-Wolf coding with random real-valued linear encoders and quantized syndromes."""
from .bounds import (
    BoundParams,
    BoundRow,
    bound_table,
    collision_cap,
    constant_free_collision_bound,
    lemma1_bound,
    lemma1_bound_log2,
    overflow_bound,
    p1_bound,
    p1_bound_log2,
    phi1,
    phi2,
)
from .decoders import (
    MultistageCode,
    SearchTooLarge,
    StagePlan,
    extract_stage_vector,
    joint_decode,
    min_entropy_decode,
    multistage_decode,
    multistage_encode,
    plan_stages,
    reconstruct_from_stages,
    typicality_decode,
)
from .encoder import (
    CodeParams,
    CoefficientDist,
    EncodingMatrix,
    Quantizer,
    code_params,
    draw_matrix,
    encode,
    encode_and_quantize,
    quantize,
    rows_for_rate,
)
from .harness import ConfigError, ExperimentConfig, TrialRecord, emit_plot_data, run_campaign
from .ip_solver import IPInstance, SolveReport, build_ip, ip_decode, solve_count
from .nsn import MultiPMF, NSNTopology, inequality_set, rate_region_check, simulate_round, validate
from .outcomes import DecodeResult, Outcome
from .seeding import trial_seed
from .source_model import (
    JointPMF,
    SequencePair,
    empirical_entropies,
    entropies,
    in_rate_region,
    is_strongly_typical,
    is_weakly_typical,
    joint_type,
    sample_pair,
)
from .stats import wilson_interval, wilson_ucb

__version__ = "0.1.0"
