"""Semi-random list coloring of triangle-free rank-3 hypergraphs.

Main entry points:

  hypergraph      RankedHypergraph, parse/serialize
  triangles       find_triangles, is_triangle_free
  preprocess      codegree_reduce, lift_coloring
  params          Parameters, derive, paper_assignment, check_constraints
  nibble          init/iterate/run, the coloring engine
  finisher        normalize, resample_until_clear, greedy_fallback
  generators      GeneratorSpec, generate
  verify          verify_coloring, independent_set_from_coloring
  experiment      run_pipeline, run_experiment
"""

from .hypergraph import (DegreeProfile, HypergraphBuilder, HypergraphError,
                         ParseError, RankedHypergraph, load, parse, save,
                         serialize)
from .triangles import TriangleWitness, find_triangles, is_triangle_free
from .preprocess import ReductionReport, codegree_reduce, lift_coloring
from .params import (ConstraintReport, ParameterError, Parameters,
                     check_constraints, claim31_report, derive,
                     from_log10_delta, paper_assignment, tail_bounds)
from .nibble import (ActivationSample, EnvelopeParams, ListAssignment,
                     NibbleState, RunConfig, SurvivalTable, TriangleFound,
                     init, iterate, run, sample_activations, lost_colors,
                     survival_prob, survival_table, update_weights,
                     assign_colors, update_color_graphs)
from .finisher import (BadEvent, FinisherResult, NormalizedDistribution,
                       find_bad_events, finish, greedy_fallback,
                       lll_condition_report, normalize, resample_until_clear)
from .generators import GeneratorError, GeneratorSpec, generate
from .verify import (Verdict, independent_set_from_coloring, verify_coloring,
                     verify_partial)
from .experiment import ExperimentResult, run_experiment, run_pipeline

__version__ = "0.1.0"
