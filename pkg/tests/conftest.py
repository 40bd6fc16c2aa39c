import sys
from pathlib import Path

import numpy as np
import pytest
from hypothesis import HealthCheck, settings

sys.path.insert(0, str(Path(__file__).parent))

settings.register_profile("default", deadline=None, max_examples=60,
                          suppress_health_check=[HealthCheck.too_slow])
settings.load_profile("default")


@pytest.fixture
def rng():
    return np.random.default_rng(12345)


def random_points(rng, n, side=1.0):
    return (rng.random((n, 2)) - 0.5) * side


# ---- shared Monte-Carlo data for the convergence and acceptance tests ------

REFERENCE_SEED = 2024


@pytest.fixture(scope="session")
def zeta_reference():
    """Reference limit constants keyed by (kind, k, nu)."""
    from fusionscale.scaling import estimate_zeta_many

    out = {}
    for z in estimate_zeta_many("mst", [0.0, 1.0, 2.0, 3.0, 4.0], replicates=4000, seed=REFERENCE_SEED):
        out[("mst", 0, z.nu)] = z
    for z in estimate_zeta_many("knng", [0.0, 2.0, 3.0, 4.0], replicates=4000,
                                seed=REFERENCE_SEED, param=1):
        out[("knng", 1, z.nu)] = z
    for k in (2, 3):
        z = estimate_zeta_many("knng", [2.0], replicates=2000, seed=REFERENCE_SEED, param=k)[0]
        out[("knng", k, 2.0)] = z
    return out


def sweep_summary(tmp_path_factory, text):
    from fusionscale.experiment import parse_config, read_rows, run_sweep

    cfg = parse_config(text)
    out = run_sweep(cfg, tmp_path_factory.mktemp(cfg.name), plots=False)
    return {(r["policy"], int(r["n"]), float(r["nu"]), r["dep_kind"], float(r["dep_param"]),
             float(r["placement_a"])): r for r in read_rows(out["summary"])}


@pytest.fixture(scope="session")
def knng_sweep(tmp_path_factory):
    """DFMRF with k-NNG dependency and MST aggregation, nu = 2, 500 runs."""
    return sweep_summary(tmp_path_factory, """
        name = knng_convergence
        policies = MST_AGG, DFMRF
        dependency = knng
        k = 1, 2, 3
        nu = 2
        n = 100, 190
        runs = 500
        seed = 1
    """)
