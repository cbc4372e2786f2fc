"""Shared builders and independent oracles for the test suite.

The oracles here deliberately re-derive results by brute force (simple-trail
enumeration, exact joint tables) so library code is never checked against
itself.
"""

import numpy as np
import pytest

from dinet import (
    AgentRule,
    CorruptionSpec,
    GenerativeNetwork,
    NoiseLaw,
    RandomDelay,
    parse_rule_expr,
)


def rule(text, p):
    expr, _ = parse_rule_expr(text)
    return AgentRule(expr, NoiseLaw.bernoulli(p))


def collider3_network():
    """Two independent drivers with a common child (binary OR dynamics)."""
    return GenerativeNetwork(
        [
            rule("e1", 0.7),
            rule("OR(y1[-1], y3[-1], e2)", 0.4),
            rule("e3", 0.6),
        ]
    )


def collider3_corruption():
    """Random two-step delay on the measurement of agent 3."""
    return CorruptionSpec({2: RandomDelay(d1=-2, d2=0, p=0.5)})


def sixnode_network():
    """Six agents: a chain 1->2->3, a fan-in 2,4->5, and 5->6.

    The innovation probability of agent 5 is not pinned down by the source
    system description; 0.5 is the assumed default.
    """
    return GenerativeNetwork(
        [
            rule("e1", 0.55),
            rule("OR(y1[-1], e2)", 0.5),
            rule("OR(y2[-1], e3)", 0.2),
            rule("e4", 0.4),
            rule("AND(OR(y2[-1], y4[-1]), e5)", 0.5),
            rule("OR(y5[-1], e6)", 0.3),
        ]
    )


def sixnode_corruption():
    return CorruptionSpec(
        {
            1: RandomDelay(d1=-2, d2=0, p=0.5),
            4: RandomDelay(d1=-2, d2=0, p=0.5),
        }
    )


def five_agent_lag2_network():
    """Binary stand-in with the lag structure of the five-agent showcase
    system: self lags {1,2} on agent 1, a lag-2 cross arc 3->4, unit lags
    elsewhere."""
    return GenerativeNetwork(
        [
            rule("XOR(AND(y1[-1], y1[-2]), e1)", 0.5),
            rule("XOR(AND(y1[-1], y2[-1]), e2)", 0.5),
            rule("AND(OR(y1[-1], y3[-1]), e3)", 0.5),
            rule("XOR(y2[-1], y3[-2], y4[-1], e4)", 0.5),
            rule("XOR(AND(y5[-1], y4[-1]), e5)", 0.5),
        ]
    )


SIXNODE_TRUE_EDGES = frozenset({(0, 1), (1, 2), (1, 4), (3, 4), (4, 5)})
SIXNODE_SPURIOUS = frozenset(
    {
        (0, 2), (0, 4), (0, 5),
        (3, 1), (3, 2), (3, 5),
        (2, 1), (4, 1), (5, 1),
        (1, 5), (2, 4), (4, 2),
        (5, 4), (2, 5), (5, 2),
    }
)
COLLIDER3_TRUE_EDGES = frozenset({(0, 1), (2, 1)})
COLLIDER3_PERTURBED = frozenset({(0, 1), (2, 1), (0, 2), (1, 2)})


# ---------------------------------------------------------------------------
# Brute-force oracles
# ---------------------------------------------------------------------------


def oracle_ancestors_or_self(g, seed):
    out = set(seed)
    stack = list(seed)
    while stack:
        v = stack.pop()
        for p in g.parents(v):
            if p not in out:
                out.add(p)
                stack.append(p)
    return out


def oracle_d_connected(g, sources, targets, conditioning):
    """Simple-trail enumeration of the active-trail conditions."""
    z = frozenset(conditioning)
    live = oracle_ancestors_or_self(g, z)
    targets = set(targets)

    def moves(v):
        for c in g.children(v):
            yield c, True
        for p in g.parents(v):
            yield p, False

    def dfs(v, entered_into_v, visited):
        for w, fwd in moves(v):
            if w in visited:
                continue
            edge_into_v = not fwd
            if entered_into_v is not None:
                collider = entered_into_v and edge_into_v
                if collider:
                    if v not in live:
                        continue
                elif v in z:
                    continue
            if w in targets:
                return True
            if dfs(w, fwd, visited | {w}):
                return True
        return False

    for x in sorted(sources):
        if x in targets:
            return True
        if dfs(x, None, {x}):
            return True
    return False


def oracle_d_separated(g, sources, targets, conditioning):
    return not oracle_d_connected(g, sources, targets, conditioning)


def oracle_perturbed_edge(g, z, i, j):
    """Simple-trail enumeration of the corrupted-reachability conditions."""
    z = frozenset(z)

    def moves(v):
        for c in g.children(v):
            yield c, True
        for p in g.parents(v):
            yield p, False

    def dfs(v, entered_into_v, visited):
        for w, fwd in moves(v):
            if w in visited:
                continue
            edge_into_v = not fwd
            if entered_into_v is not None:
                collider = entered_into_v and edge_into_v
                if collider:
                    if v not in z and w not in z:
                        continue
                elif v not in z:
                    continue
            if w == j:
                if j in z or fwd:
                    return True
                continue
            if dfs(w, fwd, visited | {w}):
                return True
        return False

    return dfs(i, None, {i})


def oracle_perturbed_graph_edges(g, z):
    return frozenset(
        (i, j)
        for i in g.nodes
        for j in g.nodes
        if i != j and oracle_perturbed_edge(g, z, i, j)
    )


def exact_joint_with_random_cpts(g, rng):
    """Exact joint table over a binary unrolled network with random positive
    conditional probability tables respecting the arc structure.

    Returns (joint array with one binary axis per node, node -> axis map).
    """
    order = g.topological_order()
    pos = {v: k for k, v in enumerate(order)}
    n = len(order)
    joint = np.ones((2,) * n)
    for v in order:
        ps = g.parents(v)
        p_one = rng.uniform(0.05, 0.95, size=(2,) * len(ps))
        factor = np.stack([1.0 - p_one, p_one], axis=-1)
        axes = [pos[p] for p in ps] + [pos[v]]
        perm = np.argsort(axes)
        factor = np.transpose(factor, perm)
        shape = [1] * n
        for a in axes:
            shape[a] = 2
        joint = joint * factor.reshape(shape)
    return joint, pos


def conditional_independence_gap(joint, x_axes, y_axes, z_axes):
    """max over conditioning assignments of the total-variation distance
    between the joint conditional and the product of its marginals."""
    keep = list(x_axes) + list(y_axes) + list(z_axes)
    other = tuple(a for a in range(joint.ndim) if a not in keep)
    marg = joint.sum(axis=other) if other else joint
    sorted_keep = sorted(keep)
    marg = np.transpose(marg, [sorted_keep.index(a) for a in keep])
    nx, ny, nz = len(x_axes), len(y_axes), len(z_axes)
    pxyz = marg.reshape(2**nx, 2**ny, 2**nz)
    pz = pxyz.sum(axis=(0, 1))
    pxz = pxyz.sum(axis=1)
    pyz = pxyz.sum(axis=0)
    gap = 0.0
    for kz in range(2**nz):
        if pz[kz] <= 0:
            continue
        cond = pxyz[:, :, kz] / pz[kz]
        prod = np.outer(pxz[:, kz] / pz[kz], pyz[:, kz] / pz[kz])
        gap = max(gap, 0.5 * np.abs(cond - prod).sum())
    return gap


@pytest.fixture
def rng():
    return np.random.default_rng(20240817)
