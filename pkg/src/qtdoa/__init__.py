"""Quantum-assisted TDoA localization via a mixed SOCP/SDP relaxation."""
from .conic import ConeDims, ConeSolution, SolverSettings, Status, conelp
from .core import (AnchorSet, RangingRow, RangingScenario, ValidationError, build_incidence,
                   combined_distance, reference_anchors, reference_scenario, truth_vector)
from .crlb import FisherInfo, fisher_information, jensen_bound, mean_error
from .harness import (ExperimentConfig, TrialRecord, read_config, run_campaign, sample_sensor,
                      summarize, write_config, write_results)
from .noise import MeasurementBatch, NoiseMode, NoiseSpec, measure, measure_classical, measure_quantum
from .quantum import (PhaseModel, ShotRecord, decode_distance, estimate_phase, outcome_probability,
                      phase_from_distance, sample_shots)
from .solver import (ConicProblem, LocalizationSolution, assemble_relaxation, localize, nls_oracle,
                     solve_conic)

__version__ = "0.1.0"
