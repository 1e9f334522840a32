"""Link-level simulator for a desk-scale model of a 128-antenna
TDD massive MU-MIMO uplink: channel synthesis, pilot-based estimation,
linear detection, hardening and power control, wideband channel
analysis, and localisation."""

__version__ = "0.1.0"

from .errors import NumericalError, RankDeficientChannelError, ScenarioError
from .scenario import (SPEED_OF_LIGHT, ArrayGeometry, Scenario, SystemConfig,
                       UePlacement, default_config, default_scenario,
                       load_scenario, make_ula, make_ura, place_ue_line,
                       save_scenario)
from .channel import (ChannelMatrix, ChannelTensor, FrequencyGrid,
                      SpatialSignature, TapSet, aoa_direction,
                      fraunhofer_distance, full_grid, iid_rayleigh,
                      load_tensor, los_channel, phase_aligned_distance,
                      planar_channel, save_tensor, spatial_signature,
                      spherical_channel, tapped_cfr)
from .frame import (EstimatedCfr, FrameSchedule, PilotMap, default_schedule,
                    ls_estimate, pilot_map, throughput_bps, uncoded_sum_se)
from .detect import (DetectorWeights, LinkReport, mmse_weights, mrc_weights,
                     post_sinr, qam_demod, qam_mod, simulate_symbols,
                     uplink_sim, zf_weights)
from .hardening import (GramMatrix, LoopResult, PowerControlState,
                        closed_loop_sim, gram, gram_average, hardening_ratio,
                        pc_fixed_sinr, pc_fixed_snr, pc_hardening)
from .analysis import (PdpResult, PowerProfile, antenna_power_profile,
                       across_array_coherence, coherence_bandwidth,
                       interpolate_cfr, pdp, pdp_from_tensor,
                       rms_delay_spread)
from .locate import (AoaEstimate, PseudoSpectrum, SnapshotSet, TdoaProblem,
                     TdoaSolution, aoa_estimate, music_spectrum,
                     peak_half_power_width, sample_covariance, subarray_split,
                     synth_snapshots, tdoa_measure, tdoa_solve)

__all__ = [name for name in dir() if not name.startswith("_")]
