"""Generative networks, data-stream corruption, and trajectory sampling.

Each agent ``i`` carries a finite-alphabet stream ``y_i`` updated by a
strictly causal rule: ``y_i[t]`` is a function of lagged stream symbols
(lags >= 1) and a fresh innovation ``e_i[t]``.  Corruption replaces the
measured stream of selected agents by ``u_i``, which may read ``y_i`` up to
the current step, its own strict past, and an independent noise process.
Only ``u_i`` is observable for corrupted agents.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from functools import cached_property

import numpy as np

from .errors import ModelError
from .expressions import (
    Const,
    Expr,
    HeldStream,
    Noise,
    Op,
    OwnStream,
    Var,
    compile_expr,
    leaves,
)
from .graphs import DirectedGraph

__all__ = [
    "NoiseLaw",
    "AgentRule",
    "GenerativeNetwork",
    "RandomDelay",
    "PacketDrop",
    "NoisyFilter",
    "CustomTable",
    "CorruptionSpec",
    "ModQuantizer",
    "ThresholdQuantizer",
    "RoundClipQuantizer",
    "TrajectorySet",
    "sample",
    "sample_batch",
    "apply_delay",
    "apply_packet_drop",
    "apply_noisy_filter",
    "write_trajectories_csv",
]

_GEN_NOISE_TAG = 0
_CORR_NOISE_TAG = 1


def _rng_for(seed, tag, agent):
    return np.random.default_rng(np.random.SeedSequence((seed, tag, agent)))


@dataclass(frozen=True)
class NoiseLaw:
    """Categorical distribution over ``{0, ..., len(probs) - 1}``."""

    probs: tuple[float, ...]

    def __post_init__(self):
        p = np.asarray(self.probs, dtype=float)
        if p.ndim != 1 or p.size < 1:
            raise ModelError("noise law needs a 1-D probability vector")
        if (p < 0).any() or abs(p.sum() - 1.0) > 1e-9:
            raise ModelError(f"noise probabilities must be >= 0 and sum to 1, got {self.probs}")

    @classmethod
    def bernoulli(cls, p):
        if not 0.0 <= p <= 1.0:
            raise ModelError(f"Bernoulli parameter {p} outside [0, 1]")
        return cls((1.0 - p, p))

    @classmethod
    def constant(cls, value, alphabet=2):
        if not 0 <= value < alphabet:
            raise ModelError(f"constant symbol {value} outside alphabet {alphabet}")
        probs = [0.0] * alphabet
        probs[value] = 1.0
        return cls(tuple(probs))

    @property
    def alphabet(self):
        return len(self.probs)

    def draw(self, rng, size):
        cum = np.cumsum(self.probs)
        cum[-1] = 1.0
        return np.searchsorted(cum, rng.random(size), side="right").astype(np.int64)


@dataclass(frozen=True)
class AgentRule:
    """Update rule for one agent: expression tree plus innovation law."""

    expr: Expr
    noise: NoiseLaw


class GenerativeNetwork:
    """A finite network of strictly causal stochastic agents.

    Parameters
    ----------
    rules : sequence of AgentRule
        One rule per agent, index order defining agent indices ``0..N-1``.
    alphabets : int or sequence of int
        Per-agent alphabet size (a single int applies to all agents).
    """

    def __init__(self, rules, alphabets=2):
        self.rules = tuple(rules)
        n = len(self.rules)
        if n == 0:
            raise ModelError("network needs at least one agent")
        if isinstance(alphabets, int):
            alphabets = (alphabets,) * n
        self.alphabets = tuple(int(a) for a in alphabets)
        if len(self.alphabets) != n:
            raise ModelError("one alphabet size per agent required")
        if any(a < 2 for a in self.alphabets):
            raise ModelError("alphabet sizes must be >= 2")
        for i, rule in enumerate(self.rules):
            if rule.noise.alphabet != self.alphabets[i]:
                raise ModelError(
                    f"agent {i}: noise law over {rule.noise.alphabet} symbols "
                    f"but alphabet is {self.alphabets[i]}"
                )
        self._compiled = [self._compile_rule(i) for i in range(n)]

    def _compile_rule(self, i):
        rule = self.rules[i]
        for leaf in leaves(rule.expr):
            if isinstance(leaf, (OwnStream, HeldStream)):
                raise ModelError(f"agent {i}: corruption-only leaf {leaf} in update rule")
            if isinstance(leaf, Var):
                if not 0 <= leaf.agent < self.n_agents:
                    raise ModelError(f"agent {i}: rule references unknown agent {leaf.agent}")
                if leaf.lag < 1:
                    raise ModelError(
                        f"agent {i}: lag {leaf.lag} on y{leaf.agent + 1} breaks strict causality"
                    )

        def leaf_width(leaf, i=i):
            if isinstance(leaf, Var):
                return self.alphabets[leaf.agent]
            return self.alphabets[i]

        fn, width = compile_expr(rule.expr, leaf_width, self.alphabets[i])
        if width > self.alphabets[i]:
            raise ModelError(
                f"agent {i}: rule can produce symbols up to {width - 1}, "
                f"outside alphabet of size {self.alphabets[i]}"
            )
        return fn

    @property
    def n_agents(self):
        return len(self.rules)

    def parent_lags(self, i):
        """Map ``j -> sorted lags`` for every stream the rule of ``i`` reads."""
        out = {}
        for leaf in leaves(self.rules[i].expr):
            if isinstance(leaf, Var):
                out.setdefault(leaf.agent, set()).add(leaf.lag)
        return {j: tuple(sorted(lags)) for j, lags in sorted(out.items())}

    @cached_property
    def max_lag(self):
        return max(
            (lag for i in range(self.n_agents) for lags in self.parent_lags(i).values() for lag in lags),
            default=0,
        )

    def graph(self):
        """Agent-level generative graph (self-dependence is not an edge)."""
        edges = {
            (j, i)
            for i in range(self.n_agents)
            for j in self.parent_lags(i)
            if j != i
        }
        return DirectedGraph(self.n_agents, edges)


# ---------------------------------------------------------------------------
# Quantizers (for the noisy-filter corruption)
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class ModQuantizer:
    """Round to nearest integer, then reduce modulo the alphabet."""

    alphabet: int

    def apply(self, values):
        return np.rint(values).astype(np.int64) % self.alphabet

    @property
    def out_alphabet(self):
        return self.alphabet


@dataclass(frozen=True)
class ThresholdQuantizer:
    """Binary quantizer: 1 where the value is >= the cut, else 0."""

    cut: float

    def apply(self, values):
        return (values >= self.cut).astype(np.int64)

    @property
    def out_alphabet(self):
        return 2


@dataclass(frozen=True)
class RoundClipQuantizer:
    """Round to nearest integer and clip into the alphabet."""

    alphabet: int

    def apply(self, values):
        return np.clip(np.rint(values).astype(np.int64), 0, self.alphabet - 1)

    @property
    def out_alphabet(self):
        return self.alphabet


# ---------------------------------------------------------------------------
# Corruption models
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class RandomDelay:
    """Random time-origin uncertainty: ``u[t] = y[t + delta]``.

    ``delta`` is ``d1`` with probability ``p`` and ``d2`` otherwise; both
    are non-positive and not both zero.  Reads past the start of the
    stream clamp to ``y[0]``.
    """

    d1: int
    d2: int
    p: float

    def __post_init__(self):
        if self.d1 > 0 or self.d2 > 0:
            raise ModelError("delay offsets must be non-positive")
        if self.d1 == 0 and self.d2 == 0:
            raise ModelError("at least one delay offset must be nonzero")
        if not 0.0 <= self.p <= 1.0:
            raise ModelError(f"delay probability {self.p} outside [0, 1]")

    def ideal_offsets(self):
        return tuple(sorted({self.d1, self.d2}, reverse=True))

    def held_offsets(self):
        return ()

    def apply(self, y, rng):
        n1 = y.shape[-1]
        delta = np.where(rng.random(y.shape) < self.p, self.d1, self.d2)
        idx = np.maximum(np.arange(n1) + delta, 0)
        return np.take_along_axis(np.atleast_2d(y), np.atleast_2d(idx), axis=-1).reshape(y.shape)


@dataclass(frozen=True)
class PacketDrop:
    """Hold-last-value loss: ``u[t] = y[t]`` w.p. ``p``, else ``u[t-1]``.

    ``u[0]`` is initialised to ``y[0]``.  ``p = 0`` is rejected: the
    measurement would never update and the pair would not be ergodic.
    """

    p: float

    def __post_init__(self):
        if not 0.0 < self.p <= 1.0:
            raise ModelError(f"packet delivery probability must be in (0, 1], got {self.p}")

    def ideal_offsets(self):
        return (0,)

    def held_offsets(self):
        return (-1,)

    def apply(self, y, rng):
        arr = np.atleast_2d(y)
        deliver = rng.random(arr.shape) < self.p
        deliver[:, 0] = True
        src = np.where(deliver, np.arange(arr.shape[1]), 0)
        src = np.maximum.accumulate(src, axis=1)
        return np.take_along_axis(arr, src, axis=1).reshape(y.shape)


@dataclass(frozen=True)
class NoisyFilter:
    """Causal FIR filter plus additive symbol noise, re-quantized.

    ``taps[k]`` weights ``y[t - k]``; reads before the start clamp to
    ``y[0]``.  The drawn noise symbol is added to the filter output before
    quantization (``noise=None`` means no noise).
    """

    taps: tuple[float, ...]
    noise: NoiseLaw | None
    quantizer: ModQuantizer | ThresholdQuantizer | RoundClipQuantizer

    def __post_init__(self):
        if len(self.taps) < 1:
            raise ModelError("noisy filter needs at least one tap")

    def ideal_offsets(self):
        return tuple(-k for k in range(len(self.taps)))

    def held_offsets(self):
        return ()

    def apply(self, y, rng):
        arr = np.atleast_2d(y)
        n1 = arr.shape[1]
        acc = np.zeros(arr.shape, dtype=float)
        for k, w in enumerate(self.taps):
            idx = np.maximum(np.arange(n1) - k, 0)
            acc += w * arr[:, idx]
        if self.noise is not None:
            acc += self.noise.draw(rng, arr.shape)
        return self.quantizer.apply(acc).reshape(y.shape)


@dataclass(frozen=True)
class CustomTable:
    """Corruption given by an explicit expression over ``y``, ``u`` and ``z``.

    ``y`` lags are <= 0 and clamp to the start of the stream; ``u`` lags
    are <= -1 and evaluate to symbol 0 before the stream starts.
    """

    expr: Expr
    noise: NoiseLaw | None = None

    def ideal_offsets(self):
        offs = sorted({l.lag for l in leaves(self.expr) if isinstance(l, OwnStream)}, reverse=True)
        return tuple(offs)

    def held_offsets(self):
        offs = sorted({l.lag for l in leaves(self.expr) if isinstance(l, HeldStream)}, reverse=True)
        return tuple(offs)

    def compile(self, alphabet):
        def leaf_width(leaf):
            if isinstance(leaf, Noise):
                if self.noise is None:
                    raise ModelError("corruption expression uses z but no noise law was given")
                return self.noise.alphabet
            return alphabet

        fn, width = compile_expr(self.expr, leaf_width, alphabet)
        if width > alphabet:
            raise ModelError(
                f"corruption map can produce symbols up to {width - 1}, "
                f"outside alphabet of size {alphabet}"
            )
        return fn

    def apply(self, y, rng, alphabet):
        arr = np.atleast_2d(y)
        n1 = arr.shape[1]
        fn = self.compile(alphabet)
        zeta = self.noise.draw(rng, arr.shape) if self.noise is not None else None
        u = np.zeros(arr.shape, dtype=np.int64)
        zero = np.zeros(arr.shape[0], dtype=np.int64)
        for t in range(n1):
            def resolve(leaf, t=t):
                if isinstance(leaf, OwnStream):
                    return arr[:, max(0, t + leaf.lag)]
                if isinstance(leaf, HeldStream):
                    return u[:, t + leaf.lag] if t + leaf.lag >= 0 else zero
                return zeta[:, t]

            u[:, t] = fn(resolve)
        return u.reshape(y.shape)


CorruptionModel = RandomDelay | PacketDrop | NoisyFilter | CustomTable


@dataclass(frozen=True)
class CorruptionSpec:
    """Per-agent corruption assignment; agents absent from ``models`` are ideal."""

    models: dict[int, CorruptionModel] = field(default_factory=dict)

    @property
    def corrupted(self):
        """The set of corrupted agent indices."""
        return frozenset(self.models)

    def validate_for(self, net):
        for k, model in self.models.items():
            if not 0 <= k < net.n_agents:
                raise ModelError(f"corruption names unknown agent {k}")
            alphabet = net.alphabets[k]
            if isinstance(model, NoisyFilter):
                if model.quantizer.out_alphabet > alphabet:
                    raise ModelError(
                        f"agent {k}: quantizer range {model.quantizer.out_alphabet} "
                        f"exceeds alphabet {alphabet}"
                    )
            if isinstance(model, CustomTable):
                model.compile(alphabet)

    def max_lag(self):
        out = 0
        for model in self.models.values():
            offs = model.ideal_offsets() + model.held_offsets()
            if offs:
                out = max(out, max(-o for o in offs))
        return out

    # Structural-assumption checks used by the theorem batteries: the
    # sufficiency->necessity direction needs every corruption map to keep a
    # strictly lagged tap on the ideal stream (C2) and either generative
    # self-dependence (B1) or an instantaneous tap (B2).

    def has_lagged_ideal_tap(self, k):
        return any(o <= -1 for o in self.models[k].ideal_offsets())

    def has_instant_ideal_tap(self, k):
        return 0 in self.models[k].ideal_offsets()


# ---------------------------------------------------------------------------
# Sampling
# ---------------------------------------------------------------------------


@dataclass
class TrajectorySet:
    """Sampled streams for one seed: ``ideal[i]`` is ``y_i``, ``corrupted[k]`` is ``u_k``."""

    horizon: int
    ideal: dict[int, np.ndarray]
    corrupted: dict[int, np.ndarray]
    seed: int

    def measured(self, i):
        """The observable stream of agent ``i`` (``u_i`` if corrupted, else ``y_i``)."""
        return self.corrupted[i] if i in self.corrupted else self.ideal[i]

    def measured_streams(self):
        return [self.measured(i) for i in sorted(self.ideal)]


def sample_batch(net, corr, horizon, seeds):
    """Sample one trajectory per seed, sharing the time loop across seeds.

    Equivalent to ``[sample(net, corr, horizon, s) for s in seeds]`` but with
    the per-step expression evaluation vectorized over the batch.
    """
    if horizon < 1:
        raise ModelError(f"horizon must be >= 1, got {horizon}")
    corr = corr if corr is not None else CorruptionSpec()
    corr.validate_for(net)
    n, n1 = net.n_agents, horizon + 1
    b = len(seeds)
    noise = np.empty((n, b, n1), dtype=np.int64)
    for i in range(n):
        law = net.rules[i].noise
        for bi, s in enumerate(seeds):
            noise[i, bi] = law.draw(_rng_for(s, _GEN_NOISE_TAG, i), n1)

    y = np.zeros((n, b, n1), dtype=np.int64)
    zero = np.zeros(b, dtype=np.int64)
    for i in range(n):
        y[i, :, 0] = noise[i, :, 0]
    fns = net._compiled
    for t in range(1, n1):
        for i in range(n):
            def resolve(leaf, i=i, t=t):
                if isinstance(leaf, Var):
                    tt = t - leaf.lag
                    return y[leaf.agent, :, tt] if tt >= 0 else zero
                return noise[i, :, t]

            y[i, :, t] = fns[i](resolve)

    out = []
    for bi, s in enumerate(seeds):
        ideal = {i: y[i, bi].copy() for i in range(n)}
        corrupted = {}
        for k in sorted(corr.corrupted):
            rng = _rng_for(s, _CORR_NOISE_TAG, k)
            model = corr.models[k]
            if isinstance(model, CustomTable):
                corrupted[k] = model.apply(ideal[k], rng, net.alphabets[k])
            else:
                corrupted[k] = model.apply(ideal[k], rng)
        out.append(TrajectorySet(horizon, ideal, corrupted, s))
    return out


def sample(net, corr, horizon, seed):
    """Sample one trajectory set; identical seeds give identical output."""
    return sample_batch(net, corr, horizon, [seed])[0]


def apply_delay(y, d1, d2, p, seed):
    """Random-delay corruption of a single stream (see ``RandomDelay``)."""
    y = np.asarray(y, dtype=np.int64)
    return RandomDelay(d1, d2, p).apply(y, np.random.default_rng(seed))


def apply_packet_drop(y, p, seed):
    """Packet-drop corruption of a single stream (see ``PacketDrop``)."""
    y = np.asarray(y, dtype=np.int64)
    return PacketDrop(p).apply(y, np.random.default_rng(seed))


def apply_noisy_filter(y, taps, noise_law, quantizer, seed):
    """FIR-filter corruption of a single stream (see ``NoisyFilter``)."""
    y = np.asarray(y, dtype=np.int64)
    model = NoisyFilter(tuple(taps), noise_law, quantizer)
    return model.apply(y, np.random.default_rng(seed))


def write_trajectories_csv(traj, path):
    """Write one column per stream; corrupted agents contribute y and u columns."""
    agents = sorted(traj.ideal)
    header = [f"y{i + 1}" for i in agents] + [f"u{k + 1}" for k in sorted(traj.corrupted)]
    cols = [traj.ideal[i] for i in agents] + [traj.corrupted[k] for k in sorted(traj.corrupted)]
    data = np.column_stack(cols)
    with open(path, "w", encoding="utf-8") as fh:
        fh.write(",".join(header) + "\n")
        for row in data:
            fh.write(",".join(str(int(v)) for v in row) + "\n")
