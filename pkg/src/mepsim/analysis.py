"""Post-hoc trace analysis.

Everything here is a pure function of (Trace, Graph, parameters): round
segmentation by well-separation, propagation extraction along pioneer
chains, the five one-shot validity checks, association classes over
arrival outcomes, cell/neighbor pattern taxonomy with its structural
invariants, error metrics, and stabilization detection against the
analytic convergence bound.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from fractions import Fraction

from .errors import InsufficientHorizonError, ParameterError
from .topology import Graph, TopologyStats
from .trace import (KIND_EXTERNAL, OUTCOME_ACCEPTED, OUTCOME_REJECTED, Trace)

# ---------------------------------------------------------------- segmentation


@dataclass(frozen=True)
class Segment:
    """One maximal trigger cluster: interval [t1, t2] and member seqs."""

    t1: int
    t2: int
    trigger_seqs: tuple

    @property
    def span(self) -> int:
        return self.t2 - self.t1


@dataclass(frozen=True)
class Segmentation:
    segments: tuple
    separated: bool
    witness: tuple | None = None  # (time_a, time_b) violating both bounds


def cluster_triggers(triggers, tau_delta: int) -> list:
    """Greedy clustering: a gap > tau_delta starts a new cluster.

    Accepts any trigger list; imposes no intra-cluster span constraint,
    so it is usable on unstabilized prefixes.
    """
    segments = []
    if not triggers:
        return segments
    start = 0
    for k in range(1, len(triggers)):
        if triggers[k].time - triggers[k - 1].time > tau_delta:
            members = triggers[start:k]
            segments.append(Segment(members[0].time, members[-1].time,
                                    tuple(m.seq for m in members)))
            start = k
    members = triggers[start:]
    segments.append(Segment(members[0].time, members[-1].time,
                            tuple(m.seq for m in members)))
    return segments


def segment(trace: Trace, tau_pi: int, tau_delta: int) -> Segmentation:
    """Split triggers into well-separated clusters.

    Every intra-cluster pair must lie within tau_pi and every
    inter-cluster pair beyond tau_delta; a pair violating both bounds is
    returned as the witness.  Within a greedy cluster (consecutive gaps
    all <= tau_delta) a violation, if any, always shows up on some
    consecutive pair, so the witness scan is linear.
    """
    if tau_delta <= 3 * tau_pi:
        raise ParameterError(
            f"need tau_delta > 3*tau_pi, got {tau_delta} <= 3*{tau_pi}")
    segments = cluster_triggers(trace.triggers, tau_delta)
    for seg in segments:
        if seg.span <= tau_pi:
            continue
        times = [trace.triggers[s].time for s in seg.trigger_seqs]
        for a, b in zip(times, times[1:]):
            if tau_pi < b - a <= tau_delta:
                return Segmentation(tuple(segments), False, (a, b))
        # span > tau_pi forces a consecutive witness; reaching here means
        # the cluster invariant was broken upstream
        raise AssertionError("cluster span exceeded tau_pi without witness")
    return Segmentation(tuple(segments), True)


# ---------------------------------------------------------------- propagation


@dataclass
class Propagation:
    """One extracted propagation: per-cell trigger instant and pioneer.

    `source[i]` is the cell reached by following pioneer pointers from i;
    None marks a broken chain (pointer loop or a pioneer triggered outside
    the segment).  `paths(i)` materializes the chain source -> ... -> i.
    """

    segment: Segment
    times: dict  # cell -> first trigger time within the segment
    pioneer: dict  # cell -> pioneer cell (== cell for an external trigger)
    source: dict  # cell -> source cell or None
    multi_triggered: tuple  # cells triggered more than once in the segment
    cross_refs: tuple  # cells whose pioneer has no trigger in the segment
    loops: tuple  # cells on a pioneer-pointer cycle
    external_cells: frozenset  # cells holding an external trigger
    explicit_paths: dict | None = None  # fixture override: cell -> path tuple

    @property
    def cells(self) -> tuple:
        return tuple(sorted(self.times))

    @property
    def sources(self) -> frozenset:
        return frozenset(s for s in self.source.values() if s is not None)

    def path(self, i: int) -> tuple | None:
        if self.explicit_paths is not None:
            return self.explicit_paths.get(i)
        if self.source.get(i) is None:
            return None
        chain = [i]
        while self.pioneer[chain[-1]] != chain[-1]:
            chain.append(self.pioneer[chain[-1]])
        return tuple(reversed(chain))

    @property
    def t_min(self) -> int:
        return min(self.times.values())

    @classmethod
    def from_paths(cls, paths: dict, times: dict | None = None) -> "Propagation":
        """Hand-built propagation from explicit per-cell paths (fixtures)."""
        times = times or {i: 0 for i in paths}
        source = {i: (p[0] if p else None) for i, p in paths.items()}
        pioneer = {i: (p[-2] if len(p) > 1 else i) for i, p in paths.items()}
        externals = frozenset(i for i, p in paths.items() if len(p) == 1)
        seg = Segment(min(times.values()), max(times.values()),
                      tuple(range(len(paths))))
        return cls(segment=seg, times=dict(times), pioneer=pioneer,
                   source=source, multi_triggered=(), cross_refs=(), loops=(),
                   external_cells=externals, explicit_paths=dict(paths))


def extract_propagation(trace: Trace, seg: Segment) -> Propagation:
    times, pioneer, multi, externals = {}, {}, [], set()
    for s in seg.trigger_seqs:
        rec = trace.triggers[s]
        if rec.cell in times:
            multi.append(rec.cell)
            continue  # keep the first trigger of the cell
        times[rec.cell] = rec.time
        pioneer[rec.cell] = rec.pioneer
        if rec.kind == KIND_EXTERNAL:
            externals.add(rec.cell)

    cross_refs = tuple(sorted(
        i for i, h in pioneer.items() if h != i and h not in times))
    source, loops = {}, set()
    for start in times:
        if start in source:
            continue
        chain, on_path = [], set()
        cur = start
        while True:
            if cur in source:
                s = source[cur]
                break
            if cur in on_path:
                s = None
                loops.update(chain)
                break
            on_path.add(cur)
            chain.append(cur)
            nxt = pioneer[cur]
            if nxt == cur:
                s = cur
                break
            if nxt not in times:
                s = None  # chain leaves the segment
                break
            cur = nxt
        for c in chain:
            source[c] = s
    return Propagation(segment=seg, times=times, pioneer=pioneer, source=source,
                       multi_triggered=tuple(sorted(set(multi))),
                       cross_refs=cross_refs, loops=tuple(sorted(loops)),
                       external_cells=frozenset(externals))


# ---------------------------------------------------------------- validation


@dataclass(frozen=True)
class OmepReport:
    valid: bool
    simple: bool
    complete: bool
    exclusive: bool
    propagative: bool
    witnesses: dict = field(default_factory=dict)

    @property
    def all_ok(self) -> bool:
        return (self.valid and self.simple and self.complete
                and self.exclusive and self.propagative)


def _common_prefix_len(a, b) -> int:
    k = 0
    for x, y in zip(a, b):
        if x != y:
            break
        k += 1
    return k


def validate_omep(p: Propagation, g: Graph, n_s) -> OmepReport:
    """Check the five one-shot properties against the source-candidate set.

    Chain-extracted propagations get the structural fast path: the
    pointer forest makes every path simple and any two paths either
    disjoint or prefix-sharing, so only sources/coverage need checking.
    Explicit-path fixtures run the full pairwise definition.
    """
    n_s = frozenset(n_s)
    witnesses = {}

    if p.explicit_paths is None:
        bad_source = sorted(i for i, s in p.source.items()
                            if s is None or s not in n_s)
        valid = not bad_source
        if bad_source:
            witnesses["valid"] = bad_source[:4]
        simple = not p.loops
        if p.loops:
            witnesses["simple"] = list(p.loops[:4])
        missing = sorted(set(range(g.node_count)) - set(p.times))
        complete = not missing and not p.multi_triggered
        if not complete:
            witnesses["complete"] = {"missing": missing[:4],
                                     "repeated": list(p.multi_triggered[:4])}
        exclusive = propagative = True
        if p.cross_refs:
            valid = False
            witnesses.setdefault("valid", list(p.cross_refs[:4]))
        return OmepReport(valid, simple, complete, exclusive, propagative,
                          witnesses)

    paths = p.explicit_paths
    valid = True
    for i, path in sorted(paths.items()):
        if not path or path[0] not in n_s:
            valid = False
            witnesses["valid"] = i
            break
    simple = True
    for i, path in sorted(paths.items()):
        if len(set(path)) != len(path):
            simple = False
            witnesses["simple"] = i
            break
    covered = set()
    for path in paths.values():
        covered.update(path)
    missing = sorted(set(range(g.node_count)) - covered)
    complete = not missing
    if missing:
        witnesses["complete"] = {"missing": missing[:4], "repeated": []}
    exclusive = propagative = True
    items = sorted(paths.items())
    for ai in range(len(items)):
        for bi in range(ai + 1, len(items)):
            a, b = items[ai][1], items[bi][1]
            shared = set(a) & set(b)
            if not shared:
                continue
            if a and b and a[0] != b[0]:
                exclusive = False
                witnesses.setdefault("exclusive", (items[ai][0], items[bi][0]))
            k = _common_prefix_len(a, b)
            if set(a[k:]) & set(b[k:]):
                propagative = False
                witnesses.setdefault("propagative", (items[ai][0], items[bi][0]))
    return OmepReport(valid, simple, complete, exclusive, propagative, witnesses)


# ---------------------------------------------------------------- patterns

LABEL_PARENT = "parent"
LABEL_CHILD = "child"
LABEL_ALIEN = "alien"
LABEL_FAMILY = "family"

ROLE_SOURCE = "source"
ROLE_SINK = "sink"
ROLE_FLOW = "flow"
ROLE_UNITED = "united"

ROLE_BANK = "bank"
ROLE_RIDGE = "ridge"
ROLE_FLAT = "flat"


@dataclass
class PatternReport:
    neighbor_labels: dict  # (i, j) -> label, for every ordered adjacent pair
    flow_role: dict  # cell -> source|sink|flow|united
    border_role: dict  # cell -> bank|ridge|flat
    counts: dict  # label -> count
    flagged_invalid: bool = False  # propagation failed one-shot validation


def classify_patterns(p: Propagation, g: Graph, trace=None,
                      segment=None) -> PatternReport:
    """Label every adjacent pair and cell from pioneers and path sources.

    Ordered label priority per pair (i, j): j is i's parent if it is i's
    pioneer, a child if i is j's pioneer, alien if their path sources
    differ, family otherwise.  Cells missing from the propagation count
    as alien to everything (their source is undefined).
    """
    labels = {}
    for i in range(g.node_count):
        for j in g.adjacency[i]:
            if p.pioneer.get(i, i) == j:
                labels[(i, j)] = LABEL_PARENT
            elif p.pioneer.get(j, j) == i:
                labels[(i, j)] = LABEL_CHILD
            elif i not in p.times or j not in p.times \
                    or p.source.get(i) is None or p.source.get(j) is None \
                    or p.source[i] != p.source[j]:
                labels[(i, j)] = LABEL_ALIEN
            else:
                labels[(i, j)] = LABEL_FAMILY

    flow_role, border_role = {}, {}
    for i in range(g.node_count):
        mine = [labels[(i, j)] for j in g.adjacency[i]]
        has_parent = LABEL_PARENT in mine
        has_child = LABEL_CHILD in mine
        if has_parent and has_child:
            flow_role[i] = ROLE_FLOW
        elif has_parent:
            flow_role[i] = ROLE_SINK
        elif has_child:
            flow_role[i] = ROLE_SOURCE
        else:
            flow_role[i] = ROLE_UNITED
        if LABEL_ALIEN in mine:
            border_role[i] = ROLE_BANK
        elif LABEL_FAMILY in mine:
            border_role[i] = ROLE_RIDGE
        else:
            border_role[i] = ROLE_FLAT

    counts = {}
    for role in list(flow_role.values()) + list(border_role.values()):
        counts[role] = counts.get(role, 0) + 1
    for lab in labels.values():
        counts[lab] = counts.get(lab, 0) + 1
    flagged = bool(p.multi_triggered or p.cross_refs or p.loops
                   or None in p.source.values())
    return PatternReport(neighbor_labels=labels, flow_role=flow_role,
                         border_role=border_role, counts=counts,
                         flagged_invalid=flagged)


def _regions(p: Propagation, g: Graph) -> dict:
    """source cell -> set of cells whose path starts there."""
    regions = {}
    for i, s in p.source.items():
        if s is not None:
            regions.setdefault(s, set()).add(i)
    return regions


@dataclass(frozen=True)
class PropertyCheck:
    name: str
    passed: bool
    detail: str = ""


def check_pattern_properties(report: PatternReport, p: Propagation,
                             g: Graph) -> list:
    """Structural invariants every valid one-shot propagation must obey."""
    flow, border = report.flow_role, report.border_role
    regions = _regions(p, g)
    is_tree = g.edge_count == g.node_count - 1
    results = []

    def add(name, passed, detail=""):
        results.append(PropertyCheck(name, passed, detail))

    bad = [s for s, cells in regions.items()
           if not any(flow[i] in (ROLE_SINK, ROLE_UNITED) for i in cells)]
    add("sink-per-region", not bad, f"regions without sinks: {bad[:4]}")

    n_sink = sum(1 for r in flow.values() if r in (ROLE_SINK, ROLE_UNITED))
    n_source = sum(1 for r in flow.values() if r in (ROLE_SOURCE, ROLE_UNITED))
    add("sinks-at-least-sources", n_sink >= n_source,
        f"sinks={n_sink} sources={n_source}")

    bad = []
    for s, cells in regions.items():
        has_non_sink = any(flow[i] not in (ROLE_SINK, ROLE_UNITED) for i in cells)
        source_non_sink = any(
            flow[i] in (ROLE_SOURCE, ROLE_FLOW) and p.source[i] == i == s
            for i in cells)
        if has_non_sink and not source_non_sink:
            bad.append(s)
    add("non-sink-region-has-non-sink-source", not bad,
        f"regions: {bad[:4]}")

    ridges = sorted(i for i, r in border.items() if r == ROLE_RIDGE)
    add("tree-has-no-ridge", not (is_tree and ridges),
        f"ridge cells on a tree: {ridges[:4]}" if is_tree else "not a tree")

    bad = sorted(i for i in range(g.node_count)
                 if border[i] == ROLE_FLAT and g.degree(i) >= 2
                 and flow[i] in (ROLE_SINK, ROLE_UNITED))
    add("flat-degree2-not-sink", not bad, f"cells: {bad[:4]}")

    bad = []
    for s, cells in regions.items():
        children = sum(1 for j in g.adjacency[s] if p.pioneer.get(j) == s)
        sinks = sum(1 for i in cells if flow[i] in (ROLE_SINK, ROLE_UNITED))
        if sinks < children:
            bad.append((s, children, sinks))
    add("source-children-bounded-by-sinks", not bad, f"regions: {bad[:4]}")

    bad = []
    for s, cells in regions.items():
        flats = [i for i in cells if border[i] == ROLE_FLAT and g.degree(i) >= 2]
        if not flats:
            continue
        required = sum(g.degree(i) - 2 for i in flats) + 1
        sinks = sum(1 for i in cells if flow[i] in (ROLE_SINK, ROLE_UNITED))
        if sinks < required:
            bad.append((s, required, sinks))
    add("flat-cells-force-sinks", not bad, f"regions: {bad[:4]}")
    return results


# ---------------------------------------------------------------- metrics


def propagation_error(p: Propagation) -> int:
    """Sum of per-cell trigger offsets from the earliest trigger."""
    t_min = p.t_min
    return sum(t - t_min for t in p.times.values())


# ---------------------------------------------------------------- stabilization


@dataclass
class StabilizationReport:
    stabilized: bool
    t_stab: int | None
    convergence_bound: int  # analytic instant by which stabilization must start
    bound_slack: int  # allowed extra span after the bound (one period)
    tau_pi_used: int
    tau_delta_used: int
    tau_nabla: int
    tau_pi_measured: int | None
    tau_nabla_measured: int | None
    k_series: list  # cluster index
    t_min_series: list
    e1_series: list
    source_fraction_series: list
    valid_series: list  # per-cluster all-ok flag
    segments: list
    first_violation: dict | None = None

    @property
    def within_bound(self) -> bool:
        return (self.stabilized
                and self.t_stab <= self.convergence_bound + self.bound_slack)


def segmentation_params(params, stats: TopologyStats) -> tuple:
    """(tau_pi, tau_delta) used to cut a trace into rounds.

    tau_pi starts from the analytic span bound diameter*d_max; tau_delta
    is tau1/2, comfortably below the inter-round gap while far above any
    intra-round span.  If the strict ordering tau_delta > 3*tau_pi fails
    on a large-diameter graph, tau_pi falls back to tau_delta/3 - 1.
    """
    tau_pi = stats.diameter * params.d_max
    tau_delta = params.tau1 // 2
    if tau_delta <= 3 * tau_pi:
        tau_pi = tau_delta // 3 - 1
        if tau_pi <= 0:
            raise ParameterError("cannot choose a separation window: "
                                 f"tau_delta={tau_delta} too small")
    return tau_pi, tau_delta


def required_horizon(params, stats: TopologyStats) -> int:
    """Minimum horizon for a meaningful stabilization verdict."""
    return convergence_bound(params, stats) + params.tau2 + 2 * params.liveness_real_max


def convergence_bound(params, stats: TopologyStats) -> int:
    r = Fraction(params.rho)
    t2 = (Fraction(params.tau2 + params.tau0) / (1 - r)
          + params.d_max + params.tau1)
    return int(math.ceil(t2))


def detect_stabilization(trace: Trace, params, stats: TopologyStats,
                         graph: Graph | None = None) -> StabilizationReport:
    """Find the earliest suffix of all-valid rounds with bounded gaps.

    The final cluster is always discarded: the horizon may truncate it
    mid-round.  Requires the horizon to cover the analytic bound plus a
    couple of liveness periods, else the verdict would be vacuous.
    """
    graph = graph or trace.graph
    bound = convergence_bound(params, stats)
    need = required_horizon(params, stats)
    if trace.horizon < need:
        raise InsufficientHorizonError(
            f"horizon {trace.horizon} < required {need} for a stabilization verdict")
    tau_pi, tau_delta = segmentation_params(params, stats)
    tau_nabla = params.liveness_real_max

    segments = cluster_triggers(trace.triggers, tau_delta)
    if segments:
        segments = segments[:-1]  # last cluster may be horizon-truncated

    all_cells = set(range(graph.node_count))
    valid_flags, e1s, fracs, t_mins, props = [], [], [], [], []
    for seg in segments:
        p = extract_propagation(trace, seg)
        report = validate_omep(p, graph, p.external_cells)
        ok = report.all_ok and seg.span <= tau_pi and set(p.times) == all_cells
        valid_flags.append(ok)
        props.append(p)
        t_mins.append(p.t_min)
        e1s.append(propagation_error(p))
        n_src = sum(1 for i, s in p.source.items() if s == i)
        fracs.append(n_src / graph.node_count if p.times else 0.0)

    # earliest index with every later cluster valid
    k0 = len(segments)
    for k in range(len(segments) - 1, -1, -1):
        if not valid_flags[k]:
            break
        k0 = k

    stabilized = k0 < len(segments)
    t_stab = segments[k0].t1 if stabilized else None
    tau_pi_meas = tau_nab_meas = None
    violation = None
    if stabilized:
        tau_pi_meas = max(seg.span for seg in segments[k0:])
        gaps = []
        for a, b in zip(props[k0:], props[k0 + 1:]):
            gaps.extend(b.times[i] - a.times[i] for i in a.times if i in b.times)
        tau_nab_meas = max(gaps) if gaps else 0
        if tau_nab_meas > tau_nabla:
            stabilized = False
            t_stab = None
            violation = {"kind": "inter-trigger-gap",
                         "gap": tau_nab_meas, "bound": tau_nabla}
    elif segments:
        bad = next(k for k in range(len(segments)) if not valid_flags[k])
        violation = {"kind": "invalid-final-cluster", "k": len(segments) - 1} \
            if all(valid_flags[:-1]) and not valid_flags[-1] else \
            {"kind": "invalid-cluster", "k": bad, "t1": segments[bad].t1}
    else:
        violation = {"kind": "no-complete-clusters"}

    return StabilizationReport(
        stabilized=stabilized, t_stab=t_stab, convergence_bound=bound,
        bound_slack=params.tau2, tau_pi_used=tau_pi,
        tau_delta_used=tau_delta, tau_nabla=tau_nabla,
        tau_pi_measured=tau_pi_meas, tau_nabla_measured=tau_nab_meas,
        k_series=list(range(len(segments))), t_min_series=t_mins,
        e1_series=e1s, source_fraction_series=fracs,
        valid_series=valid_flags, segments=segments,
        first_violation=violation)


# ---------------------------------------------------------------- association


@dataclass
class AssociationClasses:
    classes: tuple  # tuple of tuples of trigger seqs (the loose partition)
    strong_classes: tuple  # same, closure restricted to adjacent near pairs
    spans: tuple  # per loose class, max time - min time
    partitions_coincide: bool
    partition_witness: tuple | None
    span_bound: int  # longest-simple-path * d_max
    spans_ok: bool
    span_witness: tuple | None


class _UnionFind:
    def __init__(self, items):
        self.parent = {x: x for x in items}

    def find(self, x):
        p = self.parent
        root = x
        while p[root] != root:
            root = p[root]
        while p[x] != root:
            p[x], x = root, p[x]
        return root

    def union(self, a, b):
        ra, rb = self.find(a), self.find(b)
        if ra != rb:
            self.parent[rb] = ra

    def groups(self):
        out = {}
        for x in self.parent:
            out.setdefault(self.find(x), []).append(x)
        return sorted(tuple(sorted(v)) for v in out.values())


def association_classes(trace: Trace, g: Graph, window, stats=None,
                        d_max: int | None = None) -> AssociationClasses:
    """Partition the window's triggers by signal-exchange connectivity.

    Two triggers are linked when one's signal produced (acceptance) or
    was rejected against the other.  The emitting trigger of an arrival
    is recovered as the sender's latest trigger at most d_max earlier —
    unique, because a cell cannot trigger twice within d_max.  The
    strong variant only links pairs at most d_max apart; the two
    closures should coincide and every class should span at most
    (longest simple path)*d_max.
    """
    lo, hi = window
    d_max = d_max if d_max is not None else trace.params.d_max
    in_window = [t for t in trace.triggers if lo <= t.time <= hi]
    seqs = [t.seq for t in in_window]
    times = {t.seq: t.time for t in in_window}
    by_cell = {}
    for t in in_window:
        by_cell.setdefault(t.cell, []).append(t)

    def emitter(sender, arrival_time):
        best = None
        for t in by_cell.get(sender, ()):
            if arrival_time - d_max <= t.time <= arrival_time:
                best = t
        return best

    loose = _UnionFind(seqs)
    strong = _UnionFind(seqs)
    for a in trace.arrivals:
        if not lo <= a.time <= hi:
            continue
        emit = emitter(a.frm, a.time)
        if emit is None:
            continue
        if a.outcome == OUTCOME_ACCEPTED:
            other = next((t for t in by_cell.get(a.to, ())
                          if t.time == a.time), None)
        elif a.outcome == OUTCOME_REJECTED and a.rejecting_seq is not None:
            other = trace.triggers[a.rejecting_seq] \
                if lo <= trace.triggers[a.rejecting_seq].time <= hi else None
        else:
            other = None
        if other is None:
            continue
        loose.union(emit.seq, other.seq)
        if abs(emit.time - other.time) <= d_max:
            strong.union(emit.seq, other.seq)

    classes = tuple(loose.groups())
    strong_groups = tuple(strong.groups())
    coincide = classes == strong_groups
    p_witness = None
    if not coincide:
        strong_index = {}
        for grp in strong_groups:
            for s in grp:
                strong_index[s] = grp[0]
        for grp in classes:
            roots = {strong_index[s] for s in grp}
            if len(roots) > 1:
                p_witness = tuple(sorted(roots))[:2]
                break

    lg = stats.longest_simple_path if stats is not None else g.node_count - 1
    bound = lg * d_max
    spans = tuple(max(times[s] for s in grp) - min(times[s] for s in grp)
                  for grp in classes)
    s_witness = None
    for grp, span in zip(classes, spans):
        if span > bound:
            s_witness = (grp[0], grp[-1], span)
            break
    return AssociationClasses(
        classes=classes, strong_classes=strong_groups, spans=spans,
        partitions_coincide=coincide, partition_witness=p_witness,
        span_bound=bound, spans_ok=s_witness is None, span_witness=s_witness)


# ---------------------------------------------------------------- series


def series_metrics(trace: Trace, params, stats: TopologyStats,
                   graph: Graph | None = None) -> dict:
    """Per-round series shaped for plotting: offsets, sources, patterns."""
    graph = graph or trace.graph
    _, tau_delta = segmentation_params(params, stats)
    segments = cluster_triggers(trace.triggers, tau_delta)
    if segments:
        segments = segments[:-1]
    all_cells = set(range(graph.node_count))
    rows, per_k = [], []
    for k, seg in enumerate(segments):
        p = extract_propagation(trace, seg)
        report = validate_omep(p, graph, p.external_cells)
        ok = report.all_ok and set(p.times) == all_cells
        sources = {i for i, s in p.source.items() if s == i}
        t_min = p.t_min
        pattern = classify_patterns(p, graph)
        counts = {r: pattern.counts.get(r, 0)
                  for r in (ROLE_SOURCE, ROLE_SINK, ROLE_FLOW, ROLE_UNITED,
                            ROLE_BANK, ROLE_RIDGE, ROLE_FLAT)}
        per_k.append({
            "k": k,
            "t_min_ns": t_min,
            "e1_ns": propagation_error(p),
            "source_fraction": len(sources) / graph.node_count,
            "ideal": sources == all_cells,
            "valid": ok,
            "pattern_counts": counts,
        })
        for i in sorted(p.times):
            rows.append({"k": k, "t_min_ns": t_min, "cell": i,
                         "t_tilde_ns": p.times[i] - t_min,
                         "is_source": i in sources})
    return {"per_k": per_k, "scatter": rows}
