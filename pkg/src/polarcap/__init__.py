"""Capacity of the complex AWGN channel under (b1, b2)-bit polar quantization.

Analytic cell probabilities, closed-form capacity of APSK inputs, joint
optimization of the input distribution and magnitude thresholds, a
Kuhn-Tucker optimality certificate, Monte-Carlo verification, and a CLI.
"""

from .capacity import (KtcReport, OutputPmf, awgn_unquantized_capacity,
                       capacity_formula, capacity_from_params, divergence,
                       ktc_certificate, miso_capacity, mutual_information,
                       output_pmf)
from .kernel import (QuadratureError, scaled_thresholds, shift_row, shift_w,
                     tau, v_prob, v_row, w_prob, w_row)
from .mc_oracle import SimResult, empirical_w, plugin_mi, simulate_joint
from .model import (ApskInput, ChannelParams, ConstellationError, MassPoint,
                    make_constellation, support_points)
from .optimizer import (OptimizationRecord, SolverOptions,
                        alternating_optimize, classify_constellation,
                        find_class_transition, objective_b2_1,
                        optimize_input_given_quantizer,
                        optimize_quantizer_given_input, sweep)
from .quantizer import (PolarQuantizerConfig, QuantizerOutput,
                        phase_bisector, phase_region_bounds, quantize,
                        quantize_arrays)
from .specfun import binary_entropy, gaussian_q, marcum_q1, xlogx

__version__ = "1.0.0"
