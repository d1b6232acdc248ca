"""Brute-force reference simulator for tiny networks.

Steps real time one nanosecond at a time instead of jumping between
heap events, keeping explicit per-cell state (excitation bit, pending
restoration, next liveness deadline) and a per-instant micro-queue for
the fixed tie-break order: arrivals first, then liveness deadlines, in
ascending cell id.  Intentionally simple and slow; it exists only to
cross-check the event-driven simulator on graphs of up to four cells.
"""

from __future__ import annotations

from heapq import heappop, heappush

from .errors import ParameterError
from .timing import DriftAssignment, FaultModel, SimParams, local_to_real, stream
from .topology import Graph
from .trace import (ArrivalRecord, KIND_EXTERNAL, KIND_INTERNAL,
                    OUTCOME_ACCEPTED, OUTCOME_OMITTED, OUTCOME_REJECTED,
                    Trace, TriggerRecord)

MAX_ORACLE_NODES = 4
MAX_ORACLE_HORIZON = 1_000_000  # ns; the stepper visits every instant


def brute_force_simulate(graph: Graph, params: SimParams, *, delay_model,
                         horizon: int, seed=0,
                         fault_model: FaultModel | None = None,
                         drift: DriftAssignment | None = None,
                         init=None, record_arrivals: bool = True) -> Trace:
    """Per-ns reference run; same inputs and output format as simulate()."""
    from .engine import InitState, _validate_init_signals

    if graph.node_count > MAX_ORACLE_NODES:
        raise ParameterError(
            f"oracle handles at most {MAX_ORACLE_NODES} cells, got {graph.node_count}")
    if not 0 < horizon <= MAX_ORACLE_HORIZON:
        raise ParameterError(
            f"oracle horizon must be in (0, {MAX_ORACLE_HORIZON}], got {horizon}")
    if delay_model.d_min < params.d_min or delay_model.d_max > params.d_max:
        raise ParameterError("delay model bounds exceed the params delay bounds")

    n = graph.node_count
    adjacency = graph.adjacency
    tau0, tau2 = params.tau0, params.tau2
    d_min = params.d_min
    compensate = params.dmin_compensation and d_min > 0
    p = fault_model.omission_p if fault_model is not None else params.omission_p

    drift = drift or DriftAssignment(rho=params.rho)
    drifts = drift.assign(n, stream(seed, "drifts"))
    init = init or InitState()
    elapsed0 = init.resolve_elapsed(n, tau2, stream(seed, "init"))
    _validate_init_signals(init, graph, params.d_max)

    sample = delay_model.sampler(stream(seed, "delays")).sample
    omission_random = stream(seed, "omissions").random

    rest_off = [local_to_real(tau0, dv) for dv in drifts]
    ext_off = [local_to_real(tau2, dv) for dv in drifts]
    rest_off_c = [local_to_real(tau0 - d_min, dv) for dv in drifts] \
        if compensate else rest_off
    ext_off_c = [local_to_real(tau2 - d_min, dv) for dv in drifts] \
        if compensate else ext_off

    rest_due = [-1] * n
    next_ext = [0] * n
    last_seq = [-1] * n
    for i in range(n):
        e = min(elapsed0[i], tau2)
        if e < tau0:
            rest_due[i] = local_to_real(tau0 - e, drifts[i])
        next_ext[i] = local_to_real(tau2 - e, drifts[i])

    pending = {}  # arrival instant -> [(to, frm), ...] in emission order
    for frm, to, arrival in init.signals:
        pending.setdefault(arrival, []).append((to, frm))

    triggers = []  # TriggerRecord in emission order (sorted later)
    raw_arrivals = []  # (time, frm, to, outcome, provisional_rejecting_seq)

    def fire(cell: int, t: int, kind: str, pioneer: int, micro) -> None:
        # the protocol only triggers propagable cells
        excited = 1 if t <= rest_due[cell] else 0
        assert (1 - excited) == 1, "trigger on a non-propagable cell"
        last_seq[cell] = len(triggers)
        triggers.append(TriggerRecord(seq=0, cell=cell, time=t, kind=kind,
                                      pioneer=pioneer))
        if kind == KIND_INTERNAL:
            rest_due[cell] = t + rest_off_c[cell]
            next_ext[cell] = t + ext_off_c[cell]
        else:
            rest_due[cell] = t + rest_off[cell]
            next_ext[cell] = t + ext_off[cell]
        for j in adjacency[cell]:
            delay = sample(cell, j)
            if delay == 0:
                heappush(micro, (0, j, cell))
            else:
                pending.setdefault(t + delay, []).append((j, cell))

    for t in range(horizon + 1):
        micro = []
        for to, frm in pending.pop(t, ()):
            heappush(micro, (0, to, frm))
        for i in range(n):
            if next_ext[i] == t:
                heappush(micro, (2, i, i))
        while micro:
            cls, cell, sender = heappop(micro)
            if cls == 0:
                senders = [sender]
                while micro and micro[0][0] == 0 and micro[0][1] == cell:
                    senders.append(heappop(micro)[2])
                if t <= rest_due[cell]:
                    if record_arrivals:
                        rej = last_seq[cell]
                        for s in senders:
                            raw_arrivals.append((t, s, cell, OUTCOME_REJECTED, rej))
                elif p > 0.0 and omission_random() < p:
                    if record_arrivals:
                        for s in senders:
                            raw_arrivals.append((t, s, cell, OUTCOME_OMITTED, -1))
                else:
                    if record_arrivals:
                        for s in senders:
                            raw_arrivals.append((t, s, cell, OUTCOME_ACCEPTED, -1))
                    fire(cell, t, KIND_INTERNAL, min(senders), micro)
            else:
                if next_ext[cell] != t:
                    continue  # deadline superseded earlier this instant
                fire(cell, t, KIND_EXTERNAL, cell, micro)

    order = sorted(range(len(triggers)),
                   key=lambda k: (triggers[k].time, triggers[k].cell))
    remap = [0] * len(triggers)
    final_triggers = []
    for final_seq, k in enumerate(order):
        remap[k] = final_seq
        rec = triggers[k]
        final_triggers.append(TriggerRecord(seq=final_seq, cell=rec.cell,
                                            time=rec.time, kind=rec.kind,
                                            pioneer=rec.pioneer))
    arrivals = []
    for t, frm, to, outcome, rej in sorted(raw_arrivals,
                                           key=lambda a: (a[0], a[2], a[1])):
        rej_seq = remap[rej] if outcome == OUTCOME_REJECTED and rej >= 0 else None
        arrivals.append(ArrivalRecord(frm=frm, to=to, time=t, outcome=outcome,
                                      rejecting_seq=rej_seq))

    warnings = []
    if horizon < params.liveness_real_max:
        warnings.append("horizon shorter than one liveness period")
    models = {
        "delay_model": delay_model.kind,
        "omission_p": p,
        "drift_mode": drift.mode,
        "init_mode": init.mode,
    }
    return Trace(graph=graph, params=params, triggers=final_triggers,
                 arrivals=arrivals, horizon=horizon, seed=seed,
                 warnings=warnings, models=models,
                 arrivals_recorded=record_arrivals)
