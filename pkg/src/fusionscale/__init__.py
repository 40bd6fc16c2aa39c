"""Energy-scaling simulator for data-fusion policies on random sensor networks."""
from .cliques import CliqueSet, NonScalableRegimeError, choose_processor, maximal_cliques
from .geograph import (
    DependencyGraph,
    NetworkGraph,
    Router,
    SpanningTree,
    build_complete,
    build_disc,
    build_disc_network,
    build_emst,
    build_gabriel,
    build_knng,
    orient_to_root,
    power_weight,
    shortest_path,
)
from .placement import PlacementPdf, pdf_power_integral, sample_deployment, sample_poisson
from .policies import (
    FusionPlan,
    energy,
    plan_dfmrf,
    plan_dt,
    plan_mst_agg,
    plan_sp,
    verify_coverage,
)
from .scaling import (
    approx_ratio,
    dfmrf_upper_disc,
    dfmrf_upper_knng,
    estimate_zeta,
    mst_limit,
)

__version__ = "0.1.0"
