import pytest

from mepsim import DelayModel, DriftAssignment, derive_params, simulate
from mepsim.analysis import (Propagation, association_classes,
                             check_pattern_properties, classify_patterns,
                             cluster_triggers, detect_stabilization,
                             extract_propagation, convergence_bound,
                             propagation_error, segment, series_metrics,
                             validate_omep, ROLE_BANK, ROLE_FLAT, ROLE_FLOW,
                             ROLE_RIDGE, ROLE_SINK, ROLE_SOURCE, ROLE_UNITED)
from mepsim.errors import InsufficientHorizonError, ParameterError
from mepsim.timing import SimParams
from mepsim.topology import build_ring, from_edge_list, topology_stats
from mepsim.trace import (KIND_EXTERNAL, KIND_INTERNAL, OUTCOME_REJECTED,
                          ArrivalRecord, Trace, TriggerRecord)

K2 = from_edge_list(2, [(0, 1)])
P3 = from_edge_list(3, [(0, 1), (1, 2)])
D = 100

PARAMS = SimParams(d_min=0, d_max=D, rho=0.0, tau0=1000, tau1=4000, tau2=4000)


def _trace(times, cells=None, kinds=None, pioneers=None, graph=K2,
           arrivals=(), horizon=10**6):
    cells = cells or [0] * len(times)
    kinds = kinds or [KIND_EXTERNAL] * len(times)
    pioneers = pioneers if pioneers is not None else list(cells)
    trig = [TriggerRecord(seq=i, cell=c, time=t, kind=k, pioneer=h)
            for i, (t, c, k, h) in enumerate(zip(times, cells, kinds, pioneers))]
    return Trace(graph=graph, params=PARAMS, triggers=trig,
                 arrivals=list(arrivals), horizon=horizon, seed=0)


# ------------------------------------------------------------- segmentation


def test_segment_single_cluster():
    res = segment(_trace([0, D, 2 * D]), tau_pi=3 * D, tau_delta=10 * D)
    assert res.separated and len(res.segments) == 1
    assert res.segments[0].t1 == 0 and res.segments[0].t2 == 2 * D


def test_segment_large_gap_splits():
    res = segment(_trace([0, 5 * D]), tau_pi=D, tau_delta=31 * D // 10)
    assert res.separated and len(res.segments) == 2


def test_segment_middle_gap_is_a_violation():
    res = segment(_trace([0, 2 * D]), tau_pi=D, tau_delta=4 * D)
    assert not res.separated
    assert res.witness == (0, 2 * D)


def test_segment_requires_wide_separation():
    with pytest.raises(ParameterError):
        segment(_trace([0]), tau_pi=D, tau_delta=3 * D)


def test_cluster_triggers_is_lenient():
    tr = _trace([0, 2 * D, 10 * D])
    segs = cluster_triggers(tr.triggers, 4 * D)
    assert [(s.t1, s.t2) for s in segs] == [(0, 2 * D), (10 * D, 10 * D)]


# ------------------------------------------------------------- extraction


def test_extract_all_external():
    tr = _trace([0, 5], cells=[0, 1])
    seg = cluster_triggers(tr.triggers, 1000)[0]
    p = extract_propagation(tr, seg)
    assert p.source == {0: 0, 1: 1}
    assert p.path(0) == (0,) and p.path(1) == (1,)
    assert p.external_cells == {0, 1}


def test_extract_chain():
    tr = _trace([0, 80], cells=[0, 1], kinds=[KIND_EXTERNAL, KIND_INTERNAL],
                pioneers=[0, 0])
    seg = cluster_triggers(tr.triggers, 1000)[0]
    p = extract_propagation(tr, seg)
    assert p.path(1) == (0, 1) and p.source[1] == 0


def test_extract_flags_cross_segment_pioneer():
    tr = _trace([0], cells=[1], kinds=[KIND_INTERNAL], pioneers=[0])
    seg = cluster_triggers(tr.triggers, 1000)[0]
    p = extract_propagation(tr, seg)
    assert p.cross_refs == (1,) and p.source[1] is None
    rep = validate_omep(p, K2, p.external_cells)
    assert not rep.valid


def test_extract_flags_repeats():
    tr = _trace([0, 10, 20], cells=[0, 1, 0])
    seg = cluster_triggers(tr.triggers, 1000)[0]
    p = extract_propagation(tr, seg)
    assert p.multi_triggered == (0,)
    assert not validate_omep(p, K2, p.external_cells).complete


# ------------------------------------------------------------- five properties


def test_all_external_validates():
    tr = _trace([0, 5], cells=[0, 1])
    p = extract_propagation(tr, cluster_triggers(tr.triggers, 1000)[0])
    assert validate_omep(p, K2, p.external_cells).all_ok


def test_valid_negative_bad_source():
    p = Propagation.from_paths({0: (0,), 1: (0, 1)})
    rep = validate_omep(p, K2, n_s={1})  # 0 is not an allowed source
    assert not rep.valid and rep.simple


def test_simple_negative_repeating_path():
    p = Propagation.from_paths({0: (0,), 1: (0, 1, 0, 1)})
    rep = validate_omep(p, K2, n_s={0})
    assert not rep.simple


def test_simple_negative_pointer_loop():
    tr = _trace([0, 10], cells=[0, 1], kinds=[KIND_INTERNAL, KIND_INTERNAL],
                pioneers=[1, 0])
    p = extract_propagation(tr, cluster_triggers(tr.triggers, 1000)[0])
    assert p.loops
    assert not validate_omep(p, K2, p.external_cells).simple


def test_complete_negative_missing_cell():
    p = Propagation.from_paths({0: (0,), 1: (0, 1)})
    rep = validate_omep(p, P3, n_s={0})  # cell 2 never appears
    assert not rep.complete and rep.valid and rep.simple


def test_exclusive_negative_shared_cell():
    p = Propagation.from_paths({0: (0,), 1: (0, 1), 2: (1, 2)})
    rep = validate_omep(p, P3, n_s={0, 1})
    assert not rep.exclusive
    assert rep.witnesses["exclusive"]


def test_propagative_negative_reconverging_paths():
    g = from_edge_list(4, [(0, 1), (1, 2), (0, 2), (2, 3)])
    p = Propagation.from_paths({0: (0,), 1: (0, 1), 2: (0, 1, 2),
                                3: (0, 2, 3)})
    rep = validate_omep(p, g, n_s={0})
    assert not rep.propagative
    assert rep.exclusive  # single source, so exclusivity is untouched


def test_explicit_positive_chain():
    p = Propagation.from_paths({0: (0,), 1: (0, 1), 2: (0, 1, 2)})
    assert validate_omep(p, P3, n_s={0}).all_ok


# ------------------------------------------------------------- patterns


def test_chain_pattern_roles():
    p = Propagation.from_paths({0: (0,), 1: (0, 1), 2: (0, 1, 2)})
    rep = classify_patterns(p, P3)
    assert rep.flow_role == {0: ROLE_SOURCE, 1: ROLE_FLOW, 2: ROLE_SINK}
    assert ROLE_RIDGE not in rep.border_role.values()  # tree
    checks = check_pattern_properties(rep, p, P3)
    assert all(c.passed for c in checks)


def test_all_external_distinct_sources_all_bank():
    p = Propagation.from_paths({0: (0,), 1: (1,), 2: (2,)})
    rep = classify_patterns(p, P3)
    assert set(rep.flow_role.values()) == {ROLE_UNITED}
    assert set(rep.border_role.values()) == {ROLE_BANK}
    checks = check_pattern_properties(rep, p, P3)
    assert all(c.passed for c in checks)


def test_single_source_region_has_sink():
    p = Propagation.from_paths({0: (0,), 1: (0, 1), 2: (0, 1, 2)})
    rep = classify_patterns(p, P3)
    by_name = {c.name: c for c in check_pattern_properties(rep, p, P3)}
    assert by_name["sink-per-region"].passed
    assert by_name["sinks-at-least-sources"].passed


def test_flat_degree2_sink_is_flagged():
    p = Propagation.from_paths({0: (0,), 1: (0, 1), 2: (0, 1, 2)})
    rep = classify_patterns(p, P3)
    rep.border_role[1] = ROLE_FLAT
    rep.flow_role[1] = ROLE_SINK
    by_name = {c.name: c for c in check_pattern_properties(rep, p, P3)}
    assert not by_name["flat-degree2-not-sink"].passed


def test_region_without_sink_is_flagged():
    p = Propagation.from_paths({0: (0,), 1: (0, 1), 2: (0, 1, 2)})
    rep = classify_patterns(p, P3)
    for i in rep.flow_role:
        rep.flow_role[i] = ROLE_FLOW
    by_name = {c.name: c for c in check_pattern_properties(rep, p, P3)}
    assert not by_name["sink-per-region"].passed


def test_sinking_source_is_flagged():
    # non-sink cells exist but the region's source is itself a sink
    p = Propagation.from_paths({0: (0,), 1: (0, 1), 2: (0, 1, 2)})
    rep = classify_patterns(p, P3)
    rep.flow_role[0] = ROLE_SINK
    by_name = {c.name: c for c in check_pattern_properties(rep, p, P3)}
    assert not by_name["non-sink-region-has-non-sink-source"].passed


def test_ridge_on_tree_is_flagged():
    p = Propagation.from_paths({0: (0,), 1: (0, 1), 2: (0, 1, 2)})
    rep = classify_patterns(p, P3)
    rep.border_role[1] = ROLE_RIDGE
    by_name = {c.name: c for c in check_pattern_properties(rep, p, P3)}
    assert not by_name["tree-has-no-ridge"].passed


def test_source_children_bound():
    # star source with 3 children but sinks forced below the bound
    g = from_edge_list(4, [(0, 1), (0, 2), (0, 3)])
    p = Propagation.from_paths({0: (0,), 1: (0, 1), 2: (0, 2), 3: (0, 3)})
    rep = classify_patterns(p, g)
    by_name = {c.name: c for c in check_pattern_properties(rep, p, g)}
    assert by_name["source-children-bounded-by-sinks"].passed
    rep.flow_role[2] = ROLE_FLOW
    rep.flow_role[3] = ROLE_FLOW
    by_name = {c.name: c for c in check_pattern_properties(rep, p, g)}
    assert not by_name["source-children-bounded-by-sinks"].passed


def test_flat_cells_force_sinks_bound():
    p = Propagation.from_paths({0: (0,), 1: (0, 1), 2: (0, 1, 2)})
    rep = classify_patterns(p, P3)
    assert {c.name: c.passed for c in check_pattern_properties(rep, p, P3)}[
        "flat-cells-force-sinks"]
    rep.border_role[1] = ROLE_FLAT  # degree-2 flat flow cell, single sink ok
    rep.flow_role[2] = ROLE_FLOW  # now zero sinks < required 1
    by_name = {c.name: c for c in check_pattern_properties(rep, p, P3)}
    assert not by_name["flat-cells-force-sinks"].passed


# ------------------------------------------------------------- metrics


def test_propagation_error_sums_offsets():
    tr = _trace([100, 140, 180], cells=[0, 1, 2], graph=P3)
    p = extract_propagation(tr, cluster_triggers(tr.triggers, 1000)[0])
    assert propagation_error(p) == 40 + 80


# ------------------------------------------------------------- association


def test_k2_exchange_single_class():
    t0 = TriggerRecord(seq=0, cell=0, time=1000, kind=KIND_EXTERNAL, pioneer=0)
    t1 = TriggerRecord(seq=1, cell=1, time=1080, kind=KIND_INTERNAL, pioneer=0)
    arr = ArrivalRecord(frm=0, to=1, time=1080, outcome="accepted")
    tr = Trace(graph=K2, params=PARAMS, triggers=[t0, t1], arrivals=[arr],
               horizon=10**6, seed=0)
    ac = association_classes(tr, K2, (0, 10**6))
    assert ac.classes == ((0, 1),)
    assert ac.spans == (80,) and ac.spans[0] <= D
    assert ac.partitions_coincide and ac.spans_ok


def test_distant_rejection_breaks_both_checks():
    # rejection referencing a trigger older than the delay bound
    t0 = TriggerRecord(seq=0, cell=1, time=0, kind=KIND_EXTERNAL, pioneer=1)
    t1 = TriggerRecord(seq=1, cell=0, time=150, kind=KIND_EXTERNAL, pioneer=0)
    arr = ArrivalRecord(frm=0, to=1, time=200, outcome=OUTCOME_REJECTED,
                        rejecting_seq=0)
    tr = Trace(graph=K2, params=PARAMS, triggers=[t0, t1], arrivals=[arr],
               horizon=10**6, seed=0)
    ac = association_classes(tr, K2, (0, 10**6))
    assert ac.classes == ((0, 1),)
    assert not ac.partitions_coincide and ac.partition_witness is not None
    assert not ac.spans_ok and ac.span_witness is not None


def test_association_on_stabilized_run():
    g = build_ring(4)
    stats = topology_stats(g)
    params = derive_params(stats, D, 0.0)
    dm = DelayModel(kind="uniform", d_min=0, d_max=D)
    tr = simulate(g, params, delay_model=dm, horizon=60000, seed=3,
                  drift=DriftAssignment(mode="zero"))
    rep = detect_stabilization(tr, params, stats)
    assert rep.stabilized
    ac = association_classes(tr, g, (rep.t_stab, tr.horizon), stats=stats)
    assert ac.partitions_coincide and ac.spans_ok
    assert len(ac.classes) >= 2


# ------------------------------------------------------------- stabilization


def test_insufficient_horizon_raises():
    g = build_ring(4)
    stats = topology_stats(g)
    params = derive_params(stats, D, 0.0)
    dm = DelayModel(kind="uniform", d_min=0, d_max=D)
    tr = simulate(g, params, delay_model=dm, horizon=2 * params.tau2, seed=0)
    with pytest.raises(InsufficientHorizonError):
        detect_stabilization(tr, params, stats)


def test_ring4_stabilizes_within_bound():
    g = build_ring(4)
    stats = topology_stats(g)
    params = derive_params(stats, D, 0.0)
    dm = DelayModel(kind="uniform", d_min=0, d_max=D)
    for seed in range(5):
        tr = simulate(g, params, delay_model=dm, horizon=10**5, seed=seed,
                      drift=DriftAssignment(mode="zero"))
        rep = detect_stabilization(tr, params, stats)
        assert rep.stabilized
        assert rep.t_stab <= convergence_bound(params, stats) + params.tau2
        assert rep.tau_pi_measured <= stats.diameter * D
        assert rep.tau_nabla_measured <= params.liveness_real_max
        # validity flags hold on the whole suffix
        k0 = next(k for k, s in enumerate(rep.segments)
                  if s.t1 >= rep.t_stab)
        assert all(rep.valid_series[k0:])


def test_series_metrics_shapes():
    g = build_ring(4)
    stats = topology_stats(g)
    params = derive_params(stats, D, 0.0)
    dm = DelayModel(kind="uniform", d_min=0, d_max=D)
    tr = simulate(g, params, delay_model=dm, horizon=10**5, seed=1,
                  drift=DriftAssignment(mode="zero"))
    series = series_metrics(tr, params, stats)
    assert series["per_k"]
    for row in series["per_k"]:
        assert 0.0 <= row["source_fraction"] <= 1.0
        assert row["e1_ns"] >= 0
        assert row["ideal"] == (row["source_fraction"] == 1.0)
    ks = {r["k"] for r in series["scatter"]}
    assert ks == set(r["k"] for r in series["per_k"])
    assert all(r["t_tilde_ns"] >= 0 for r in series["scatter"])
