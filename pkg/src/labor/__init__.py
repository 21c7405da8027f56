"""Layer-neighbor sampling for mini-batch GNN training.

The package samples message-flow graphs with NS, LADIES, PLADIES and the
LABOR-i family, and ships a Monte Carlo lab that checks the estimators'
bias and variance against closed forms.
"""

from ._kernels import BACKEND
from .estimators import (
    McReport,
    exact_aggregate,
    hajek_estimate,
    ht_estimate,
    monte_carlo_report,
    ns_variance,
    poisson_variance,
    synthetic_features,
)
from .graph import (
    Graph,
    GraphCorruptionError,
    GraphFormatError,
    erdos_renyi,
    from_edges,
    gen_synthetic,
    khop_neighborhood,
    load_graph,
    power_law,
    save_graph,
    shared_star,
)
from .pipeline import BenchmarkSpec, LayerStack, MetricsReport, emit_report, run_benchmark, sample_multilayer
from .samplers import (
    ConfigError,
    SampledLayer,
    SamplerConfig,
    config_from_string,
    labor_sample,
    ladies_sample,
    make_plan,
    neighbor_sample,
    pladies_sample,
    sample_layer,
    weighted_labor_sample,
)
from .solver import (
    DomainError,
    expected_sample_size,
    gather_neighborhood,
    labor_fixed_point,
    solve_cs,
    weighted_solve_cs,
)
from .variates import VariateKey

__version__ = "0.1.0"

__all__ = [name for name in dir() if not name.startswith("_")]
