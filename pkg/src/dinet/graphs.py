"""Directed-graph core: generative graphs, time-unrolled Bayesian networks,
active-trail and d-separation queries, and the corrupted-measurement
reachability construction that predicts spurious edges.

Agent-level graphs may contain cycles (feedback between agents is allowed);
the time-unrolled networks are always DAGs.  D-separation runs as a
reachability sweep over (node, entry-orientation) states rather than trail
enumeration, which is equivalent for existence queries and linear-time.
"""

from __future__ import annotations

import itertools
import json
from collections import deque
from dataclasses import dataclass, field
from functools import cached_property
from typing import NamedTuple

from .errors import GraphError

__all__ = [
    "DirectedGraph",
    "TimedNode",
    "ideal_node",
    "corrupted_node",
    "UnrolledNetwork",
    "TrailQuery",
    "unroll_dbn",
    "unroll_perturbed_dbn",
    "is_active_trail",
    "d_separated",
    "find_active_trail",
    "perturbed_graph",
    "spurious_links",
    "GraphDiff",
    "predicted_vs_inferred",
    "graph_to_dot",
]

IDEAL = "ideal"
CORRUPTED = "corrupted"


class TimedNode(NamedTuple):
    """One random variable of an unrolled network: a stream symbol at a time."""

    kind: str
    agent: int
    time: int

    def __str__(self):
        prefix = "y" if self.kind == IDEAL else "u"
        return f"{prefix}{self.agent + 1}[{self.time}]"


def ideal_node(agent, time):
    return TimedNode(IDEAL, agent, time)


def corrupted_node(agent, time):
    return TimedNode(CORRUPTED, agent, time)


@dataclass(frozen=True)
class DirectedGraph:
    """Agent-level directed graph; self-loops are not stored.

    Self-dependence of an agent on its own past lives in the update-rule
    lags, not in the edge set.
    """

    node_count: int
    edges: frozenset = field(default_factory=frozenset)

    def __init__(self, node_count, edges=()):
        object.__setattr__(self, "node_count", int(node_count))
        object.__setattr__(self, "edges", frozenset((int(i), int(j)) for i, j in edges))
        if self.node_count < 1:
            raise GraphError("graph needs at least one node")
        for i, j in self.edges:
            if i == j:
                raise GraphError(f"self-loop {i}->{j} is not representable")
            if not (0 <= i < self.node_count and 0 <= j < self.node_count):
                raise GraphError(f"edge {i}->{j} outside node range 0..{self.node_count - 1}")

    @cached_property
    def _parents(self):
        out = {v: [] for v in range(self.node_count)}
        for i, j in sorted(self.edges):
            out[j].append(i)
        return {v: tuple(ps) for v, ps in out.items()}

    @cached_property
    def _children(self):
        out = {v: [] for v in range(self.node_count)}
        for i, j in sorted(self.edges):
            out[i].append(j)
        return {v: tuple(cs) for v, cs in out.items()}

    @property
    def nodes(self):
        return range(self.node_count)

    def has_node(self, v):
        try:
            return 0 <= int(v) < self.node_count and int(v) == v
        except (TypeError, ValueError):
            return False

    def parents(self, v):
        return self._parents[v]

    def children(self, v):
        return self._children[v]

    def has_edge(self, i, j):
        return (i, j) in self.edges

    @cached_property
    def is_acyclic(self):
        try:
            _topological_order(self)
            return True
        except GraphError:
            return False

    def to_dot(self, dashed=(), labels=None, name="G"):
        return graph_to_dot(self, dashed=dashed, labels=labels, name=name)


class UnrolledNetwork:
    """Time-indexed DAG over stream variables, with an observability map.

    Arcs go strictly forward in time, except the same-time arc from an
    ideal symbol to its corrupted measurement (the only instantaneous
    dependence the corruption model allows).
    """

    def __init__(self, horizon, nodes, arcs, observed):
        if horizon < 1:
            raise GraphError(f"horizon must be >= 1, got {horizon}")
        self.horizon = int(horizon)
        self.nodes = frozenset(nodes)
        self.arcs = frozenset(arcs)
        self.observed = frozenset(observed)
        parents = {v: [] for v in self.nodes}
        children = {v: [] for v in self.nodes}
        for src, dst in sorted(self.arcs):
            if src not in self.nodes or dst not in self.nodes:
                raise GraphError(f"arc {src}->{dst} references a missing node")
            same_time_ok = (
                src.time == dst.time
                and src.kind == IDEAL
                and dst.kind == CORRUPTED
                and src.agent == dst.agent
            )
            if src.time >= dst.time and not same_time_ok:
                raise GraphError(f"arc {src}->{dst} does not advance time")
            parents[dst].append(src)
            children[src].append(dst)
        self._parents = {v: tuple(ps) for v, ps in parents.items()}
        self._children = {v: tuple(cs) for v, cs in children.items()}
        if not self.observed <= self.nodes:
            raise GraphError("observed set contains unknown nodes")
        self.corrupted_agents = frozenset(v.agent for v in self.nodes if v.kind == CORRUPTED)

    def __eq__(self, other):
        return (
            isinstance(other, UnrolledNetwork)
            and self.horizon == other.horizon
            and self.nodes == other.nodes
            and self.arcs == other.arcs
            and self.observed == other.observed
        )

    def __repr__(self):
        return (
            f"UnrolledNetwork(horizon={self.horizon}, {len(self.nodes)} nodes, "
            f"{len(self.arcs)} arcs)"
        )

    def has_node(self, v):
        return v in self.nodes

    def parents(self, v):
        return self._parents[v]

    def children(self, v):
        return self._children[v]

    def is_observed(self, v):
        return v in self.observed

    def measured(self, agent, time):
        """The observable variable of ``agent`` at ``time``."""
        kind = CORRUPTED if agent in self.corrupted_agents else IDEAL
        return TimedNode(kind, agent, time)

    def topological_order(self):
        return _topological_order(self)

    def to_dot(self, name="G"):
        lines = [f"digraph {name} {{", "  rankdir=LR;"]
        for v in sorted(self.nodes):
            attrs = ""
            if v not in self.observed:
                attrs = ' [style=filled, fillcolor=gray80]'
            lines.append(f'  "{v}"{attrs};')
        for src, dst in sorted(self.arcs):
            style = " [style=dashed, color=red]" if dst.kind == CORRUPTED else ""
            lines.append(f'  "{src}" -> "{dst}"{style};')
        lines.append("}")
        return "\n".join(lines) + "\n"


def _topological_order(g):
    """Kahn's algorithm over any graph exposing nodes/parents/children."""
    nodes = list(g.nodes)
    indeg = {v: len(g.parents(v)) for v in nodes}
    ready = sorted(v for v in nodes if indeg[v] == 0)
    queue = deque(ready)
    order = []
    while queue:
        v = queue.popleft()
        order.append(v)
        for c in g.children(v):
            indeg[c] -= 1
            if indeg[c] == 0:
                queue.append(c)
    if len(order) != len(nodes):
        raise GraphError("graph contains a directed cycle")
    return order


# ---------------------------------------------------------------------------
# Unrolling
# ---------------------------------------------------------------------------


def unroll_dbn(net, horizon):
    """Unroll a generative network into its dynamic Bayesian network.

    Arcs run from each lagged rule argument ``y_j[t - k]`` to ``y_i[t]``
    for every ``1 <= t <= horizon``; references before time 0 are dropped,
    so the time-0 variables are roots.  All variables are observed.
    """
    if horizon < 1:
        raise GraphError(f"horizon must be >= 1, got {horizon}")
    nodes = {ideal_node(i, t) for i in range(net.n_agents) for t in range(horizon + 1)}
    arcs = set()
    lag_map = {i: net.parent_lags(i) for i in range(net.n_agents)}
    for i in range(net.n_agents):
        for t in range(1, horizon + 1):
            for j, lags in lag_map[i].items():
                for k in lags:
                    if t - k >= 0:
                        arcs.add((ideal_node(j, t - k), ideal_node(i, t)))
    return UnrolledNetwork(horizon, nodes, arcs, observed=nodes)


def unroll_perturbed_dbn(net, corr, horizon):
    """Unroll a generative network together with its corrupted measurements.

    For each corrupted agent ``k`` this adds variables ``u_k[t]`` with arcs
    from the ideal-stream times the corruption map reads (clamped at the
    start of the stream) and from its own strict past.  Corrupted agents'
    ideal streams become latent; everything else stays observed.
    """
    base = unroll_dbn(net, horizon)
    z = sorted(corr.corrupted)
    if not z:
        return base
    nodes = set(base.nodes)
    arcs = set(base.arcs)
    for k in z:
        model = corr.models[k]
        for t in range(horizon + 1):
            u = corrupted_node(k, t)
            nodes.add(u)
            for off in model.ideal_offsets():
                arcs.add((ideal_node(k, max(0, t + off)), u))
            for off in model.held_offsets():
                if t + off >= 0:
                    arcs.add((corrupted_node(k, t + off), u))
    zset = set(z)
    observed = {v for v in nodes if v.kind == CORRUPTED or v.agent not in zset}
    return UnrolledNetwork(horizon, nodes, arcs, observed)


# ---------------------------------------------------------------------------
# Active trails and d-separation
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class TrailQuery:
    """A d-separation question: are all of ``sources`` separated from ``target``?"""

    sources: frozenset
    target: object
    conditioning: frozenset

    def __init__(self, sources, target, conditioning=()):
        object.__setattr__(self, "sources", frozenset(sources))
        object.__setattr__(self, "target", target)
        object.__setattr__(self, "conditioning", frozenset(conditioning))
        if not self.sources:
            raise GraphError("query needs at least one source node")
        overlap = (self.sources | {self.target}) & self.conditioning
        if self.target in self.sources or overlap:
            raise GraphError("source, target, and conditioning sets must be disjoint")


def _check_membership(g, nodes):
    for v in nodes:
        if not g.has_node(v):
            raise GraphError(f"node {v} is not in the graph")


def _ancestors_or_self(g, seed):
    out = set(seed)
    stack = list(seed)
    while stack:
        v = stack.pop()
        for p in g.parents(v):
            if p not in out:
                out.add(p)
                stack.append(p)
    return out


def _require_dag(g):
    if isinstance(g, DirectedGraph) and not g.is_acyclic:
        raise GraphError("d-separation is only defined on acyclic graphs")


_IN, _OUT = 0, 1  # entry orientation: arc points into / out of the node


def _active_states(g, sources, conditioning):
    """BFS over (node, entry-orientation) states reachable by active trails.

    Returns the visited-state map with back-pointers for witness recovery.
    A node is d-connected to ``sources`` iff it appears in some visited
    state.  Orientation ``_IN`` means the trail entered along an arc
    pointing into the node, ``_OUT`` along an arc leaving it.
    """
    cond = frozenset(conditioning)
    collider_live = _ancestors_or_self(g, cond)
    prev = {}
    queue = deque()

    def push(state, origin):
        if state not in prev:
            prev[state] = origin
            queue.append(state)

    for s in sorted(sources):
        for c in g.children(s):
            push((c, _IN), ("source", s))
        for p in g.parents(s):
            push((p, _OUT), ("source", s))

    while queue:
        state = queue.popleft()
        v, mode = state
        if mode == _IN:
            if v not in cond:
                for c in g.children(v):
                    push((c, _IN), state)
            if v in collider_live:
                for p in g.parents(v):
                    push((p, _OUT), state)
        else:
            if v not in cond:
                for c in g.children(v):
                    push((c, _IN), state)
                for p in g.parents(v):
                    push((p, _OUT), state)
    return prev


def find_active_trail(g, sources, targets, conditioning=()):
    """Return one active trail from ``sources`` to ``targets`` or ``None``.

    The witness is a node sequence whose consecutive elements are adjacent;
    it may revisit a node (in opposite orientations), which does not affect
    activeness since the trail conditions are local to each triple.
    """
    sources = frozenset(sources)
    targets = frozenset(targets)
    conditioning = frozenset(conditioning)
    _check_membership(g, sources | targets | conditioning)
    _require_dag(g)
    hit = sources & targets
    if hit:
        v = sorted(hit)[0]
        return [v]
    prev = _active_states(g, sources, conditioning)
    for state in prev:
        if state[0] in targets:
            path = []
            cur = state
            while True:
                path.append(cur[0])
                origin = prev[cur]
                if origin[0] == "source":
                    path.append(origin[1])
                    return path[::-1]
                cur = origin
    return None


def d_separated(g, query):
    """True iff no active trail joins the query's sources to its target."""
    witness = find_active_trail(
        g, query.sources, {query.target}, query.conditioning
    )
    return witness is None


def is_active_trail(g, trail, conditioning=()):
    """Check a concrete node sequence against the active-trail conditions.

    Consecutive nodes must be adjacent in ``g``; when both orientations of
    an adjacent pair exist, every assignment is tried.  Interior colliders
    must be in the conditioning set or have a descendant there; interior
    non-colliders must be outside it.
    """
    trail = list(trail)
    conditioning = frozenset(conditioning)
    _check_membership(g, set(trail) | conditioning)
    if len(trail) < 2:
        raise GraphError("a trail needs at least two nodes")
    options = []
    for a, b in zip(trail, trail[1:]):
        orient = []
        if b in g.children(a):
            orient.append(_IN)  # arc a->b: points into b
        if b in g.parents(a):
            orient.append(_OUT)  # arc b->a: leaves b
        if not orient:
            raise GraphError(f"trail nodes {a} and {b} are not adjacent")
        options.append(orient)
    collider_live = _ancestors_or_self(g, conditioning)
    for assignment in itertools.product(*options):
        ok = True
        for m in range(1, len(trail) - 1):
            v = trail[m]
            entering, leaving = assignment[m - 1], assignment[m]
            is_collider = entering == _IN and leaving == _OUT
            if is_collider:
                if v not in collider_live:
                    ok = False
                    break
            elif v in conditioning:
                ok = False
                break
        if ok:
            return True
    return False


# ---------------------------------------------------------------------------
# Perturbed-graph prediction
# ---------------------------------------------------------------------------


def perturbed_graph(g, z):
    """The agent-level graph of edges inferable from corrupted measurements.

    An edge ``i -> j`` appears iff the generative graph contains a trail
    from ``i`` to ``j`` in which every interior non-collider is corrupted,
    every interior collider is either corrupted or followed by a corrupted
    node, and (for an uncorrupted ``j``) the final hop is a forward edge.
    The search runs over walk states (node, entry orientation); local
    per-triple constraints make this equivalent to searching simple trails.
    Direct edges of ``g`` are always preserved.
    """
    z = frozenset(z)
    for v in z:
        if not g.has_node(v):
            raise GraphError(f"corrupted node {v} is not in the graph")
    edges = set()
    for i in range(g.node_count):
        prev = set()
        queue = deque()

        def push(state):
            if state not in prev:
                prev.add(state)
                queue.append(state)

        for c in g.children(i):
            push((c, _IN))
        for p in g.parents(i):
            push((p, _OUT))
        while queue:
            v, mode = queue.popleft()
            if v in z:
                for c in g.children(v):
                    push((c, _IN))
                for p in g.parents(v):
                    push((p, _OUT))
            elif mode == _IN:
                # v is an uncorrupted collider: the walk may continue only
                # into a corrupted predecessor.
                for p in g.parents(v):
                    if p in z:
                        push((p, _OUT))
        for j in range(g.node_count):
            if j == i:
                continue
            if (j, _IN) in prev or (j in z and (j, _OUT) in prev):
                edges.add((i, j))
    return DirectedGraph(g.node_count, edges)


def spurious_links(generative, perturbed):
    """Edges of the perturbed graph absent from the generative graph."""
    return frozenset(perturbed.edges - generative.edges)


# ---------------------------------------------------------------------------
# Prediction vs. inference report
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class GraphDiff:
    """Set differences between a predicted and an inferred edge set."""

    node_count: int
    missing_edges: frozenset
    extra_edges: frozenset
    predicted_spurious: frozenset
    inferred_spurious: frozenset
    spurious_recall: float

    @property
    def matches(self):
        return not self.missing_edges and not self.extra_edges

    def to_json_dict(self):
        def edge_list(edges):
            return [f"{i + 1}->{j + 1}" for i, j in sorted(edges)]

        return {
            "matches": self.matches,
            "missing_edges": edge_list(self.missing_edges),
            "extra_edges": edge_list(self.extra_edges),
            "predicted_spurious": edge_list(self.predicted_spurious),
            "inferred_spurious": edge_list(self.inferred_spurious),
            "spurious_recall": self.spurious_recall,
        }

    def to_json(self, indent=2):
        return json.dumps(self.to_json_dict(), indent=indent) + "\n"


def predicted_vs_inferred(predicted, inferred, generative=None):
    """Compare a predicted graph against an inferred one.

    ``missing_edges`` were predicted but not inferred; ``extra_edges`` were
    inferred but not predicted.  When the generative graph is supplied,
    edges are additionally classified as spurious (present in a graph but
    absent from the generative one) and the recall of predicted spurious
    edges among the inferred ones is reported.
    """
    if predicted.node_count != inferred.node_count:
        raise GraphError(
            f"node-count mismatch: {predicted.node_count} vs {inferred.node_count}"
        )
    missing = frozenset(predicted.edges - inferred.edges)
    extra = frozenset(inferred.edges - predicted.edges)
    pred_sp = frozenset()
    inf_sp = frozenset()
    recall = 1.0
    if generative is not None:
        if generative.node_count != predicted.node_count:
            raise GraphError("generative graph has a different node count")
        pred_sp = spurious_links(generative, predicted)
        inf_sp = spurious_links(generative, inferred)
        if pred_sp:
            recall = len(pred_sp & inferred.edges) / len(pred_sp)
    return GraphDiff(
        node_count=predicted.node_count,
        missing_edges=missing,
        extra_edges=extra,
        predicted_spurious=pred_sp,
        inferred_spurious=inf_sp,
        spurious_recall=recall,
    )


def graph_to_dot(g, dashed=(), labels=None, name="G"):
    """DOT text for an agent graph; edges in ``dashed`` render dashed red."""
    dashed = {(int(i), int(j)) for i, j in dashed}
    if labels is None:
        labels = {v: str(v + 1) for v in g.nodes}
    lines = [f"digraph {name} {{"]
    for v in sorted(g.nodes):
        lines.append(f'  "{labels[v]}";')
    for i, j in sorted(g.edges):
        style = " [style=dashed, color=red]" if (i, j) in dashed else ""
        lines.append(f'  "{labels[i]}" -> "{labels[j]}"{style};')
    lines.append("}")
    return "\n".join(lines) + "\n"
