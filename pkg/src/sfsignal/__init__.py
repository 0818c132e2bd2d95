"""Self-fulfilling traffic signals for atomic routing games with Gaussian beliefs."""
from .errors import (DimensionMismatch, Disconnected, GameFileError, InfeasibleTopology,
                     InvalidParams, NoConvergence, NoStableScale, SignalDesignError,
                     SingularCovariance, ToleranceUnreachable, TooShort, UnknownRoute,
                     ZeroRank)
from .gaussian import GaussianDist, LinearGaussianObs, ReducedSpace, posterior, reduce, restore
from .mvn import CdfControl, cdf, cdf_batch
from .game import FlowVector, GameDefinition, ODPair, read_game, write_game
from .prediction import (BeliefParams, ChoiceProbabilities, SignalPolicy,
                         aggregate_flow_belief, predict_outcome_flow,
                         route_choice_probabilities)
from .designer import (FixedPointResult, SelfMap, StabilityReport, find_fixed_point,
                       jacobian_at, min_stable_signal_scale, self_map_g, stability)
from .minority import MgParams, mg_fixed_point, mg_self_map, mg_variance_bound
from .simulator import (SimConfig, Trajectory, detect_oscillation, play_one_shot,
                        play_repeated, wardrop_baseline)

__version__ = "0.1.0"
