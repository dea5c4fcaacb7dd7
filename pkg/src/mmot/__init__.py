"""Discrete multi-marginal optimal transport.

Exact and entropic solvers, signature analysis of mixed cost Hessians,
block approximations, and a harness measuring how MOT_eps approaches MOT_0.
"""

from .analysis import (
    KappaEstimate,
    SignatureReport,
    assemble_g,
    bipartitions,
    kappa_estimate,
    laplace_exponent_fit,
    signature,
)
from .approx import (
    BlockPlan,
    BoxPartition,
    block_approximation,
    box_partition,
    entropy_H_delta,
    verify_block_bounds,
)
from .costs import CostModel, evaluate_on_grid, mixed_hessian
from .entropic import (
    EntropicSolution,
    SinkhornConfig,
    eps_scaling_solve,
    plan_from_potentials,
    sinkhorn_solve,
    sinkhorn_sweep,
)
from .exact import (
    LPSolution,
    c_conjugate_update,
    duality_gap_field,
    lp_solve,
    monotone_oracle_1d,
)
from .harness import RateFit, RateTable, compare_bounds, emit_outputs, fit_rate, rate_sweep
from .measures import (
    Coupling,
    DiscreteMarginal,
    PotentialSet,
    ProductSpace,
    cost_integral,
    grid_marginal,
    marginal_projection,
    product_coupling,
    relative_entropy,
)

__version__ = "0.1.0"
