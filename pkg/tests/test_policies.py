import math
from collections import Counter

import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

from fusionscale.cliques import maximal_cliques
from fusionscale.geograph import (
    DependencyGraph,
    Router,
    build_complete,
    build_disc,
    build_emst,
    build_gabriel,
    build_knng,
    power_weight,
)
from fusionscale.placement import Deployment, PlacementPdf, sample_deployment
from fusionscale.policies import (
    AGGREGATION,
    FORWARDING,
    energy,
    plan_dfmrf,
    plan_dt,
    plan_mst_agg,
    plan_sp,
    verify_coverage,
)

seeds = st.integers(0, 2**32 - 1)
dep_kinds = st.sampled_from([("none", 0), ("knng", 1), ("knng", 2), ("knng", 3),
                             ("disc", 0.3), ("disc", 0.6), ("disc", 0.9)])


def dep_graph(dep, kind, param):
    if kind == "knng":
        return build_knng(dep.points, min(param, dep.n - 1))
    if kind == "disc":
        return build_disc(dep.points, param)
    return DependencyGraph.empty(dep.n)


def fixed_deployment(points, fc=0):
    pts = np.asarray(points, dtype=float)
    return Deployment(pts, len(pts), 1.0, fc, 0, PlacementPdf.uniform())


def test_dt_plan():
    dep = fixed_deployment([[0, 0], [3, 4], [1, 0]], fc=2)
    plan = plan_dt(dep)
    assert plan.links() == [(0, 2), (1, 2)]
    rep = energy(plan, 2.0)
    assert rep.total == pytest.approx(1 + 4 + 16)
    assert rep.per_phase == {"forwarding": rep.total, "aggregation": 0.0}
    assert rep.average == pytest.approx(rep.total / 3)


def test_sp_relays_along_line():
    dep = fixed_deployment([[0, 0], [1, 0], [2, 0], [3, 0]], fc=0)
    plan = plan_sp(dep, nu=2.0)
    # packets are not combined: node 3's reading crosses three hops
    assert plan.link_counts() == Counter({(1, 0): 3, (2, 1): 2, (3, 2): 1})
    assert energy(plan, 2.0).total == pytest.approx(6.0)


def test_mst_agg_plan():
    dep = fixed_deployment([[0, 0], [1, 0], [2, 0], [3, 0]], fc=1)
    plan = plan_mst_agg(dep)
    assert plan.links(AGGREGATION) == [(0, 1), (2, 1), (3, 2)]
    assert plan.links(FORWARDING) == []


def test_dfmrf_triangle():
    dep = fixed_deployment([[0, 0], [1, 0], [0.5, 0.8], [5, 5]], fc=3)
    dg = build_disc(dep.points, 1.5)
    plan = plan_dfmrf(dep, dg, nu=2.0)
    assert plan.cliques == [(0, 1, 2), (3,)]
    p = plan.processors[0]
    assert sorted(plan.links(FORWARDING)) == sorted((i, p) for i in (0, 1, 2) if i != p)
    trace = verify_coverage(plan, dg)
    assert trace.valid
    assert trace.delivered == Counter({(0, 1, 2): 1, (3,): 1})


def test_member_of_several_cliques_sends_once_per_clique():
    # path 0 - 1 - 2: node 1 sits in two cliques
    dep = fixed_deployment([[0, 0], [1, 0], [2, 0]], fc=0)
    dg = DependencyGraph(3, np.array([[0, 1], [1, 2]]), "custom", 0.0)
    plan = plan_dfmrf(dep, dg, nu=2.0, proc_mode="min_index")
    assert plan.link_counts(FORWARDING) == Counter({(1, 0): 1, (2, 1): 1})
    plan = plan_dfmrf(dep, dg, nu=2.0, proc_mode="min_cost")
    assert sum(plan.link_counts(FORWARDING).values()) == 2


@given(seed=seeds, n=st.integers(2, 40), kind=dep_kinds, nu=st.sampled_from([1.0, 2.0, 4.0]))
def test_policies_at_least_emst(seed, n, kind, nu):
    dep = sample_deployment(n, 1.0, seed=seed)
    tree = build_emst(dep.points)
    floor = tree.total_power_weight(nu)
    dg = dep_graph(dep, *kind)
    router = Router(build_complete(dep.points), nu)
    for plan in (plan_dfmrf(dep, dg, nu=nu, router=router), plan_sp(dep, nu=nu, router=router),
                 plan_mst_agg(dep, tree), plan_dt(dep)):
        assert energy(plan, nu).total >= floor * (1 - 1e-12)
    assert energy(plan_mst_agg(dep, tree), nu).total == pytest.approx(floor, rel=1e-12)


@given(seed=seeds, n=st.integers(2, 40), nu=st.sampled_from([1.0, 2.0, 3.0, 4.0]))
def test_dfmrf_two_approximation_for_one_nng(seed, n, nu):
    dep = sample_deployment(n, 1.0, seed=seed)
    dg = build_knng(dep.points, 1)
    ratio = energy(plan_dfmrf(dep, dg, nu=nu), nu).total / build_emst(dep.points).total_power_weight(nu)
    assert 1 - 1e-12 <= ratio <= 2 + 1e-12


@given(seed=seeds, n=st.integers(2, 40), kind=dep_kinds)
def test_dfmrf_forwarding_at_most_direct_edges(seed, n, kind):
    dep = sample_deployment(n, 1.0, seed=seed)
    dg = dep_graph(dep, *kind)
    plan = plan_dfmrf(dep, dg, nu=2.0)
    # per clique the routed cost never beats the direct links it replaces
    direct = 0.0
    for c, p in zip(plan.cliques, plan.processors):
        direct += power_weight(dep.points, [(i, p) for i in c if i != p], 2.0)
    assert energy(plan, 2.0).per_phase["forwarding"] <= direct * (1 + 1e-12)


@given(seed=seeds, n=st.integers(2, 40))
def test_independent_dfmrf_is_mst_agg(seed, n):
    dep = sample_deployment(n, 1.0, seed=seed)
    a = plan_dfmrf(dep, DependencyGraph.empty(n), nu=2.0)
    b = plan_mst_agg(dep)
    assert a.links(FORWARDING) == [] and a.links() == b.links()


@given(seed=seeds, n=st.integers(2, 40), kind=dep_kinds,
       net_kind=st.sampled_from(["complete", "gabriel"]), mode=st.sampled_from(["min_cost", "min_index"]))
def test_dfmrf_coverage(seed, n, kind, net_kind, mode):
    dep = sample_deployment(n, 1.0, seed=seed)
    dg = dep_graph(dep, *kind)
    net = build_complete(dep.points) if net_kind == "complete" else build_gabriel(dep.points)
    trace = verify_coverage(plan_dfmrf(dep, dg, net, nu=2.0, proc_mode=mode), dg)
    assert trace.valid, trace.problems
    assert sorted(trace.delivered) == maximal_cliques(dg).cliques
    assert set(trace.delivered.values()) == {1}


@given(seed=seeds, n=st.integers(2, 30), kind=dep_kinds)
def test_raw_forwarding_policies_cover_everything(seed, n, kind):
    dep = sample_deployment(n, 1.0, seed=seed)
    dg = dep_graph(dep, *kind)
    assert verify_coverage(plan_dt(dep), dg).valid
    assert verify_coverage(plan_sp(dep, nu=2.0), dg).valid


def test_mst_agg_misses_dependent_cliques():
    dep = sample_deployment(20, 1.0, seed=3)
    dg = build_knng(dep.points, 2)
    trace = verify_coverage(plan_mst_agg(dep), dg)
    assert not trace.valid
    assert trace.missing == [c for c in maximal_cliques(dg) if len(c) > 1]
    assert verify_coverage(plan_mst_agg(dep), DependencyGraph.empty(20)).valid


def test_coverage_flags_broken_plans():
    dep = sample_deployment(12, 1.0, seed=5)
    dg = build_disc(dep.points, 1.2)
    plan = plan_dfmrf(dep, dg, nu=2.0)
    fwd = np.flatnonzero(plan.phase == FORWARDING)
    assert len(fwd)
    keep = np.ones(len(plan.src), bool)
    keep[fwd[0]] = False
    dropped = type(plan)(plan.policy_kind, plan.deployment, plan.src[keep], plan.dst[keep],
                         plan.phase[keep], plan.origin[keep], plan.clique[keep],
                         plan.cliques, plan.processors)
    trace = verify_coverage(dropped, dg)
    assert not trace.valid and trace.missing
    doubled = type(plan)(plan.policy_kind, plan.deployment,
                         *(np.concatenate([a, a[plan.phase == AGGREGATION][:1]])
                           for a in (plan.src, plan.dst, plan.phase, plan.origin, plan.clique)),
                         plan.cliques, plan.processors)
    trace = verify_coverage(doubled, dg)
    assert not trace.valid and trace.duplicated


@given(seed=seeds, n=st.integers(2, 30), nu=st.floats(0, 5))
def test_average_times_n_is_total(seed, n, nu):
    dep = sample_deployment(n, 1.0, seed=seed)
    rep = energy(plan_dfmrf(dep, build_knng(dep.points, 1), nu=max(nu, 0.0)), nu)
    assert math.isclose(rep.average * n, rep.total, rel_tol=1e-9, abs_tol=1e-300)
    assert rep.total == pytest.approx(sum(rep.per_phase.values()))


def test_sp_grows_dfmrf_does_not():
    def mean_avg(policy, n):
        vals = []
        for r in range(40):
            dep = sample_deployment(n, 1.0, seed=11, stream=(n, r))
            plan = plan_sp(dep, nu=2.0) if policy == "SP" else plan_dfmrf(dep, build_knng(dep.points, 1))
            vals.append(energy(plan, 2.0).average)
        return np.mean(vals)

    assert mean_avg("SP", 200) > 1.5 * mean_avg("SP", 50)
    assert mean_avg("DFMRF", 200) < 1.2 * mean_avg("DFMRF", 50)
