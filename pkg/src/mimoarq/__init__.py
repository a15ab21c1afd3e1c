"""Outage analysis and simulation of multi-bit feedback INR-ARQ over
MIMO block-fading channels with discrete constellations."""

__version__ = "0.1.0"

from .constellation import (Constellation, from_name, joint_alphabet,
                            load_points_csv, make_psk, make_qam)
from .diversity import (DiversityQuery, DiversityValue,
                        constant_power_diversity, d_dagger, d_ddagger,
                        multi_bit_diversity, one_bit_diversity,
                        random_coding_exponent, tradeoff_curve)
from .errors import (CapacityExceededError, ConfigError,
                     DesignInfeasibleError, InfeasibleError, MimoArqError,
                     ProtocolViolationError, SnrOutOfRangeError)
from .feedback import (FeedbackVector, ThresholdTree, canonical_grid_tree,
                       design_thresholds, quantize)
from .mi import (MiCdfTable, MiSample, block_mi, build_mi_table, cdf_at,
                 draw_fading, round_mi, scalar_mi_quadrature)
from .power import (BranchTable, PowerPolicy, allocate_round,
                    appendix_b_policy, approx_branch_probs, constant_policy,
                    outage_bound, solve_eq28)
from .sim import (EpisodeTrace, OutageCurve, SimResult, estimate_outage,
                  run_episode, sweep_snr, wilson_interval)
from .config import (ChannelConfig, ExperimentConfig, db_to_linear,
                     linear_to_db, load_config)
