"""Fixed-weight spectral ConvNets on graphs and on the underlying space.

A network is a stack of layers; each layer filters every input channel
through a grid of spectral filters, mixes channels through a matrix, adds
constant biases, applies a pointwise activation, and optionally pools onto
a coarsened graph.  The same description runs in two places:

* on a graph, with filters applied through the layer's operator and pooling
  through a coarsening map;
* on the underlying space, with filters acting diagonally on band-limited
  coefficients and a band projection after every activation (activations do
  not preserve band limits, so the projection is part of the definition).

The module also measures the per-layer hypothesis terms of the transfer
bound (Laplacian mismatch, round-trip consistency, activation commutation,
pooling consistency) and evaluates the bound itself.
"""

from __future__ import annotations

import configparser
from dataclasses import dataclass
from functools import cached_property

import numpy as np

from .errors import ParameterError, TopologyError, TruncationError
from .filters import Filter, apply_exact, make_filter
from .graphs import OperatorWithInnerProduct, eigendecompose
from .sampling import CoarseningMap
from .spaces import CircleSpace, GraphSpace


@dataclass(frozen=True)
class Activation:
    """Pointwise nonlinearity; contractive and positively homogeneous."""

    kind: str

    def __post_init__(self):
        if self.kind not in ("relu", "abs"):
            raise ParameterError(f"unknown activation {self.kind!r}")

    def apply(self, x):
        x = np.asarray(x)
        return np.maximum(x, 0.0) if self.kind == "relu" else np.abs(x)

    __call__ = apply


def pool(signal: np.ndarray, cmap: CoarseningMap, kind: str) -> np.ndarray:
    """Pool a fine signal onto the coarse vertices.

    Max pooling takes the parent maximum scaled by 1/sqrt(K) and is defined
    for nonnegative signals only; l2 averaging takes sqrt(mean of squares).
    Singletons pass through unchanged under both kinds.
    """
    signal = np.asarray(signal)
    if kind == "max" and np.any(signal < 0):
        raise ParameterError(
            f"max pooling needs a nonnegative signal (min {signal.min():g})"
        )
    return _pool_raw(signal, cmap, kind)


def _pool_raw(signal: np.ndarray, cmap: CoarseningMap, kind: str) -> np.ndarray:
    if kind not in ("max", "l2avg"):
        raise ParameterError(f"unknown pooling kind {kind!r}")
    out = np.empty(cmap.n_coarse, dtype=float)
    for row in range(cmap.n_coarse):
        parents = list(cmap.parents(row))
        vals = signal[parents]
        k = len(parents)
        if kind == "max":
            out[row] = vals.max() / np.sqrt(k)
        else:
            out[row] = np.sqrt(float(vals @ vals) / k)
    return out


@dataclass(frozen=True)
class LayerSpec:
    """One layer: a K_l x K_{l-1} filter grid, mixing, biases, pooling."""

    filters: tuple
    mix: np.ndarray
    biases: np.ndarray
    pooling: str = "none"

    def __post_init__(self):
        mix = np.asarray(self.mix, dtype=float)
        biases = np.asarray(self.biases, dtype=float)
        k_out = len(self.filters)
        if k_out == 0 or any(len(row) != len(self.filters[0]) for row in self.filters):
            raise TopologyError("filter grid must be rectangular and nonempty")
        k_in = len(self.filters[0])
        if mix.shape != (k_out, k_in):
            raise TopologyError(
                f"mix matrix {mix.shape} does not match filter grid ({k_out}, {k_in})"
            )
        if biases.shape != (k_out,):
            raise TopologyError(f"need {k_out} biases, got {biases.shape}")
        if self.pooling not in ("none", "max", "l2avg"):
            raise ParameterError(f"unknown pooling kind {self.pooling!r}")
        object.__setattr__(self, "filters", tuple(tuple(row) for row in self.filters))
        object.__setattr__(self, "mix", mix)
        object.__setattr__(self, "biases", biases)

    @property
    def k_in(self) -> int:
        return len(self.filters[0])

    @property
    def k_out(self) -> int:
        return len(self.filters)

    def mix_inf_norm(self) -> float:
        return float(np.abs(self.mix).sum(axis=1).max())


@dataclass(frozen=True)
class ConvNetSpec:
    """A full network: layers, activation, and the band at every depth."""

    layers: tuple
    activation: Activation
    bands: tuple

    def __post_init__(self):
        if not self.layers:
            raise TopologyError("network needs at least one layer")
        if len(self.bands) != len(self.layers) + 1:
            raise TopologyError(
                f"need {len(self.layers) + 1} bands for {len(self.layers)} layers"
            )
        if any(b2 < b1 for b1, b2 in zip(self.bands, self.bands[1:])):
            raise TopologyError("bands must be nondecreasing")
        for l, (prev, layer) in enumerate(zip(self.layers, self.layers[1:]), start=1):
            if layer.k_in != prev.k_out:
                raise TopologyError(
                    f"layer {l + 1} expects {layer.k_in} channels, "
                    f"layer {l} outputs {prev.k_out}"
                )

    @property
    def n_layers(self) -> int:
        return len(self.layers)

    @property
    def k_input(self) -> int:
        return self.layers[0].k_in

    def mixing_bound(self) -> float:
        """A = max_l ||A^l||_inf over the layers."""
        return max(layer.mix_inf_norm() for layer in self.layers)

    def max_bias(self) -> float:
        return max(float(np.abs(layer.biases).max()) for layer in self.layers)

    def bias_free(self) -> bool:
        return self.max_bias() == 0.0

    def max_lipschitz(self) -> float:
        consts = [
            f.lipschitz_constant
            for layer in self.layers
            for row in layer.filters
            for f in row
        ]
        if any(c is None for c in consts):
            raise ParameterError("every filter needs a Lipschitz constant")
        return max(consts)

    def normalized_on(self, spectrum) -> "ConvNetSpec":
        """Rescale every filter to sup norm 1 on ``spectrum``, folding each
        factor into the corresponding mixing entry so the network mapping is
        unchanged."""
        new_layers = []
        for layer in self.layers:
            new_grid = []
            new_mix = np.array(layer.mix, dtype=float, copy=True)
            for i, row in enumerate(layer.filters):
                new_row = []
                for j, filt in enumerate(row):
                    scaled, factor = filt.normalized_on(spectrum)
                    new_row.append(scaled)
                    new_mix[i, j] *= factor
                new_grid.append(tuple(new_row))
            new_layers.append(
                LayerSpec(tuple(new_grid), new_mix, layer.biases, layer.pooling)
            )
        return ConvNetSpec(tuple(new_layers), self.activation, self.bands)


def load_convnet_spec(path) -> ConvNetSpec:
    """Load a network description from a plain-text document.

    Format (INI-style)::

        [net]
        activation = relu
        bands = 1.0, 1.5, 2.0

        [layer 1]
        filters = lowpass(2.0) ; highpass(2.0)
        mix = 1.0 ; 1.0
        biases = 0.0, 0.0
        pooling = max

    ``filters`` and ``mix`` list one output channel per ';'-separated row
    and one input channel per ','-separated column; ``pooling`` is ``none``,
    ``max``, or ``l2avg``.  Layers are read in section order.
    """
    parser = configparser.ConfigParser()
    with open(path) as fh:
        parser.read_file(fh)
    if "net" not in parser:
        raise ParameterError(f"{path}: missing [net] section")
    net = parser["net"]
    activation = Activation(net.get("activation", "relu").strip())
    bands = tuple(float(b) for b in net.get("bands", "").split(",") if b.strip())
    layer_sections = [s for s in parser.sections() if s.startswith("layer")]
    layer_sections.sort(key=lambda s: int(s.split()[1]))
    layers = []
    for section in layer_sections:
        sec = parser[section]
        grid = tuple(
            tuple(make_filter(cell.strip()) for cell in row.split(","))
            for row in sec["filters"].split(";")
        )
        mix = np.array(
            [[float(cell) for cell in row.split(",")] for row in sec["mix"].split(";")]
        )
        k_out = len(grid)
        biases = np.array(
            [float(b) for b in sec.get("biases", "").split(",") if b.strip()]
            or [0.0] * k_out
        )
        layers.append(LayerSpec(grid, mix, biases, sec.get("pooling", "none").strip()))
    return ConvNetSpec(tuple(layers), activation, bands)


def forward_graph(spec: ConvNetSpec, operators, pooling_maps, inputs):
    """Run the network on a graph; returns the channel signals per layer.

    ``operators[l]`` is the layer-(l+1) input operator (the graph where that
    layer's filters act); ``pooling_maps[l]`` is the coarsening used by
    layer l+1 or None.  ``inputs`` holds the K_0 input channel vectors.
    """
    if len(operators) != spec.n_layers or len(pooling_maps) != spec.n_layers:
        raise TopologyError("need one operator and one pooling map per layer")
    if len(inputs) != spec.k_input:
        raise TopologyError(f"network expects {spec.k_input} input channels")
    eigs = [
        op if not isinstance(op, OperatorWithInnerProduct) else eigendecompose(op)
        for op in operators
    ]
    signals = [np.asarray(ch, dtype=float) for ch in inputs]
    outputs = []
    for l, layer in enumerate(spec.layers):
        dim = eigs[l].dim
        if any(ch.shape[0] != dim for ch in signals):
            raise TopologyError(
                f"layer {l + 1}: channel length does not match its graph ({dim})"
            )
        mixed = []
        for k_out in range(layer.k_out):
            acc = np.full(dim, layer.biases[k_out], dtype=float)
            for k_in in range(layer.k_in):
                filtered = apply_exact(layer.filters[k_out][k_in], eigs[l], signals[k_in])
                acc = acc + layer.mix[k_out, k_in] * np.real(filtered)
            mixed.append(spec.activation.apply(acc))
        if layer.pooling != "none":
            cmap = pooling_maps[l]
            if cmap is None:
                raise TopologyError(f"layer {l + 1} pools but has no coarsening map")
            mixed = [pool(ch, cmap, layer.pooling) for ch in mixed]
        signals = mixed
        outputs.append(tuple(signals))
    return outputs


class _SpaceOps:
    """Pointwise evaluation and band projection for either space model."""

    def __init__(self, space, top_band: float, oversample: int = 8):
        self.space = space
        if isinstance(space, GraphSpace):
            self.grid = None
        else:
            n_max = CircleSpace.max_frequency(top_band)
            self.grid_size = max(4096, oversample * 2 * (n_max + 1))
            self.grid = np.arange(self.grid_size) / self.grid_size

    def dim(self, band: float) -> int:
        return self.space.dim_pw(band)

    def eigenvalues(self, band: float) -> np.ndarray:
        return self.space.eigenvalues_up_to(band)

    def pointwise_then_project(self, coeffs: np.ndarray, in_band: float,
                               out_band: float, func) -> np.ndarray:
        if self.grid is None:
            values = func(self.space.synthesize(coeffs, in_band))
            return self.space.project_pw(out_band, values)
        values = func(self.space.basis_matrix(self.grid, in_band) @ coeffs)
        return self.space.analyze_grid(values, out_band)

    def project_constant(self, value: float, band: float) -> np.ndarray:
        if self.grid is None:
            ones = np.ones(self.space.n_vertices)
            return value * self.space.project_pw(band, ones)
        out = np.zeros(self.dim(band))
        out[0] = value  # the constant is the first circle basis function
        return out

    def pad(self, coeffs: np.ndarray, from_band: float, to_band: float) -> np.ndarray:
        out = np.zeros(self.dim(to_band), dtype=float)
        out[: coeffs.shape[0]] = coeffs
        return out


def forward_continuous(spec: ConvNetSpec, space, inputs):
    """Run the network on the underlying space; returns per-layer
    coefficient stacks.

    ``inputs`` holds K_0 coefficient vectors in the band of depth zero.
    Filters act diagonally, biases are projected constants, the activation
    is evaluated pointwise (oversampled quadrature on the circle, exact
    vertex arithmetic on a graph space), and each layer ends with the
    projection onto its band.  No pooling happens on this side.
    """
    ops = _SpaceOps(space, spec.bands[-1])
    if len(inputs) != spec.k_input:
        raise TopologyError(f"network expects {spec.k_input} input channels")
    dim0 = ops.dim(spec.bands[0])
    signals = []
    for ch in inputs:
        ch = np.asarray(ch, dtype=float)
        if ch.shape[0] != dim0:
            raise TopologyError(
                f"input channel has {ch.shape[0]} coefficients, band holds {dim0}"
            )
        signals.append(ch)
    outputs = []
    for l, layer in enumerate(spec.layers):
        band_in = spec.bands[l]
        band_out = spec.bands[l + 1]
        lams = ops.eigenvalues(band_in)
        next_signals = []
        for k_out in range(layer.k_out):
            acc = ops.project_constant(layer.biases[k_out], band_in)
            for k_in in range(layer.k_in):
                g_vals = np.real(layer.filters[k_out][k_in].evaluate(lams))
                acc = acc + layer.mix[k_out, k_in] * (g_vals * signals[k_in])
            projected = ops.pointwise_then_project(
                acc, band_in, band_out, spec.activation.apply
            )
            next_signals.append(np.real(projected))
        signals = next_signals
        outputs.append(tuple(signals))
    return outputs


def convnet_transfer_bound(n_layers: int, d_lipschitz: float, a_bound: float,
                           b_bound: float, delta: float, count: int,
                           input_norm: float = 1.0) -> float:
    """Bound on the interpolated output gap between the two networks.

    ``(L D sqrt(count) + 2L + 2)`` times the norm-growth envelope
    ``A^L ||f|| + B (A^L - 1)/(A - 1)`` (or ``||f|| + L B`` when the mixing
    bound is 1), times the hypothesis tolerance delta.  The bias-free
    normalized case with unit input reduces to ``(L D sqrt(count) + 2L + 2)
    delta``.
    """
    if not 0.0 <= delta < 1.0:
        raise ParameterError(f"hypothesis tolerance {delta:g} outside [0, 1)")
    if a_bound <= 0:
        raise ParameterError("mixing bound must be positive")
    if count < 0 or n_layers < 1:
        raise ParameterError("need a nonnegative count and at least one layer")
    front = n_layers * d_lipschitz * np.sqrt(count) + 2 * n_layers + 2
    if a_bound > 1.0:
        growth = a_bound**n_layers * input_norm + b_bound * (
            (a_bound**n_layers - 1.0) / (a_bound - 1.0)
        )
    else:
        # the growth recursion is monotone in the mixing bound, so the
        # unit-mixing envelope also covers a_bound < 1
        growth = input_norm + n_layers * b_bound
    return float(front * growth * delta)


@dataclass(frozen=True)
class ConvNetGraphSetting:
    """Per-layer graphs and maps tying one graph to the underlying space.

    ``sample_maps[l]`` carries vertex signals of the space to the layer-l
    graph (layer 0 is the network input graph); ``operators[l]`` is the
    layer-l graph operator used by layer l+1's filters; ``pooling_maps[l]``
    coarsens layer l to layer l+1 when that layer pools.
    """

    space: GraphSpace
    sample_maps: tuple
    operators: tuple
    pooling_maps: tuple

    @classmethod
    def build(cls, space: GraphSpace, spec: ConvNetSpec,
              initial_map: np.ndarray | None = None,
              initial_operator: OperatorWithInnerProduct | None = None,
              coarsenings: dict | None = None) -> "ConvNetGraphSetting":
        """Chain maps and operators through the layers.

        ``coarsenings`` maps 1-based layer indices to their CoarseningMap;
        every pooling layer in ``spec`` needs one.  Each pooled layer's
        operator is the collapse ``C Delta C^T`` of the previous one.
        """
        from .sampling import coarsened_laplacian

        s = np.eye(space.n_vertices) if initial_map is None else np.asarray(initial_map)
        op = space.operator if initial_operator is None else initial_operator
        coarsenings = coarsenings or {}
        maps = [s]
        operators = [op]
        pooling = []
        for l, layer in enumerate(spec.layers, start=1):
            if layer.pooling != "none":
                if l not in coarsenings:
                    raise TopologyError(f"layer {l} pools but has no coarsening map")
                cmap = coarsenings[l]
                s = cmap.s_matrix @ s
                op = coarsened_laplacian(cmap, op)
                pooling.append(cmap)
            else:
                pooling.append(None)
            maps.append(s)
            operators.append(op)
        return cls(space, tuple(maps), tuple(operators), tuple(pooling))

    @cached_property
    def layer_eigs(self):
        return tuple(eigendecompose(op) for op in self.operators)

    def run(self, spec: ConvNetSpec, inputs_on_space):
        """Sample space signals onto layer 0 and run the graph network."""
        sampled = [self.sample_maps[0] @ np.asarray(ch) for ch in inputs_on_space]
        return forward_graph(
            spec, self.layer_eigs[: spec.n_layers], self.pooling_maps, sampled
        )

    def interpolate_output(self, channel: np.ndarray) -> np.ndarray:
        """Carry a final-layer signal back to the space: R = S^T."""
        return self.sample_maps[-1].T @ np.asarray(channel)


@dataclass(frozen=True)
class HypothesisErrors:
    """The four measured hypothesis terms of the network transfer bound."""

    laplacian: tuple
    consistency: float
    activation: tuple
    pooling: tuple

    @property
    def delta(self) -> float:
        terms = list(self.laplacian) + [self.consistency] + list(self.activation) + list(self.pooling)
        return max(terms) if terms else 0.0


def hypothesis_errors(setting: ConvNetGraphSetting, spec: ConvNetSpec,
                      n_probes: int = 16, seed: int = 0) -> HypothesisErrors:
    """Measure the four per-layer hypothesis terms for one graph.

    Laplacian mismatch and round-trip consistency are exact operator norms
    over the per-layer bands; the activation-commutation and pooling terms
    are suprema estimated over the band basis plus seeded random unit
    probes (both quantities are positively homogeneous, so unit probes
    suffice).
    """
    space = setting.space
    n_layers = spec.n_layers
    rng = np.random.default_rng(np.random.SeedSequence((seed, 0xC0)))
    lap_terms = []
    for l in range(n_layers):
        band = spec.bands[l]
        basis = space.pw_basis(band)
        s_l = setting.sample_maps[l]
        mismatch = s_l @ (space.operator.matrix @ basis) - (
            setting.operators[l].matrix @ (s_l @ basis)
        )
        lap_terms.append(float(np.linalg.norm(mismatch, 2)))

    band_top = spec.bands[n_layers]
    basis_top = space.pw_basis(band_top)
    s_top = setting.sample_maps[n_layers]
    round_trip = basis_top - s_top.T @ (s_top @ basis_top)
    consistency = float(np.linalg.norm(round_trip, 2))

    activation_terms = []
    pooling_terms = []
    for l in range(1, n_layers + 1):
        band_lo, band_hi = spec.bands[l - 1], spec.bands[l]
        basis_lo = space.pw_basis(band_lo)
        proj_hi = space.projector_matrix(band_hi)
        s_prev = setting.sample_maps[l - 1]
        probes = _unit_probes(basis_lo.shape[1], n_probes, rng)
        worst = 0.0
        for c in probes:
            f_vals = basis_lo @ c
            lhs = spec.activation.apply(s_prev @ f_vals)
            rhs = s_prev @ (proj_hi @ spec.activation.apply(f_vals))
            worst = max(worst, float(np.linalg.norm(lhs - rhs)))
        activation_terms.append(worst)

        layer = spec.layers[l - 1]
        if layer.pooling == "none":
            pooling_terms.append(0.0)
        else:
            cmap = setting.pooling_maps[l - 1]
            basis_hi = space.pw_basis(band_hi)
            s_l = setting.sample_maps[l]
            worst = 0.0
            for c in _unit_probes(basis_hi.shape[1], n_probes, rng):
                f_vals = basis_hi @ c
                pooled = _pool_raw(s_prev @ f_vals, cmap, layer.pooling)
                direct = s_l @ f_vals
                worst = max(worst, float(np.linalg.norm(pooled - direct)))
            pooling_terms.append(worst)

    return HypothesisErrors(
        laplacian=tuple(lap_terms),
        consistency=consistency,
        activation=tuple(activation_terms),
        pooling=tuple(pooling_terms),
    )


def _unit_probes(dim: int, n_random: int, rng) -> list:
    probes = [col for col in np.eye(dim)]
    for _ in range(n_random):
        v = rng.normal(size=dim)
        probes.append(v / np.linalg.norm(v))
    return probes


def continuous_vs_graph_error(spec: ConvNetSpec, setting: ConvNetGraphSetting,
                              probes) -> float:
    """Largest per-channel gap between the space network and the graph
    network carried back by interpolation, over unit-norm probe inputs."""
    space = setting.space
    band0 = spec.bands[0]
    worst = 0.0
    for coeffs in probes:
        coeffs = np.asarray(coeffs, dtype=float)
        norm = float(np.linalg.norm(coeffs))
        if norm == 0.0:
            raise ParameterError("probe inputs must be nonzero")
        f_space = space.synthesize(coeffs, band0)
        cont = forward_continuous(spec, space, [coeffs])[-1]
        graph = setting.run(spec, [f_space])[-1]
        for k in range(spec.layers[-1].k_out):
            cont_vec = space.synthesize(cont[k], spec.bands[-1])
            back = setting.interpolate_output(graph[k])
            worst = max(worst, float(np.linalg.norm(cont_vec - back)) / norm)
    return worst


def two_graph_output_error(spec: ConvNetSpec, setting1: ConvNetGraphSetting,
                           setting2: ConvNetGraphSetting, probes) -> float:
    """Largest per-channel gap between the two interpolated graph outputs."""
    space = setting1.space
    band0 = spec.bands[0]
    worst = 0.0
    for coeffs in probes:
        coeffs = np.asarray(coeffs, dtype=float)
        norm = float(np.linalg.norm(coeffs))
        f_space = space.synthesize(coeffs, band0)
        out1 = setting1.run(spec, [f_space])[-1]
        out2 = setting2.run(spec, [f_space])[-1]
        for k in range(spec.layers[-1].k_out):
            diff = setting1.interpolate_output(out1[k]) - setting2.interpolate_output(out2[k])
            worst = max(worst, float(np.linalg.norm(diff)) / norm)
    return worst


def spectral_decay_check(activation: Activation, band: float, probes,
                         truncation: int = 8192, grid: int = 1 << 18) -> float:
    """Worst weighted high-frequency energy ratio after the activation.

    For band-limited circle signals f, the activation output satisfies
    ``sum_n n^2 |<rho(f), phi_n>|^2 <= M^2 ||f||^2`` with M the largest
    frequency in the band.  Returns the worst measured ratio over the
    probes, with the sum truncated at ``truncation`` (truncation only
    lowers the measured side, so the bound check stays sound).

    The truncation is validated through the Parseval residual: the grid
    energy of the activation output not captured by the first
    ``truncation`` frequencies must stay below 1e-8 of the total, else a
    :class:`TruncationError` is raised.
    """
    circle = CircleSpace()
    m_freq = circle.max_frequency(band)
    if truncation < m_freq:
        raise ParameterError("truncation must cover the probe band")
    if truncation >= grid // 4:
        raise ParameterError("grid must oversample the truncation frequency")
    xs = np.arange(grid) / grid
    basis = circle.basis_matrix(xs, band)
    weights = np.arange(1, truncation + 1, dtype=float) ** 2
    worst = 0.0
    for coeffs in probes:
        coeffs = np.asarray(coeffs, dtype=float)
        norm2 = float(coeffs @ coeffs)
        if norm2 == 0.0:
            raise ParameterError("probes must be nonzero")
        rho_vals = activation.apply(basis @ coeffs)
        total_energy = float(rho_vals @ rho_vals) / grid
        if total_energy <= 1e-30:  # activation annihilated the probe
            continue
        spectrum = np.fft.rfft(rho_vals) / grid
        # |A_n|^2 carries both the cosine and sine energy at frequency n:
        # energy_n = 2 |A_n|^2 in the orthonormal real basis.
        energy = 2.0 * np.abs(spectrum[1 : truncation + 1]) ** 2
        weighted = float(weights @ energy)
        captured = float(np.abs(spectrum[0]) ** 2 + energy.sum())
        tail = max(total_energy - captured, 0.0)
        if tail > 1e-8 * total_energy:
            raise TruncationError(
                f"energy beyond frequency {truncation} is {tail:.3e} "
                f"({tail / total_energy:.3e} of the total); raise the truncation"
            )
        if m_freq == 0:
            ratio = 0.0 if weighted <= 1e-20 * norm2 else np.inf
        else:
            ratio = weighted / (m_freq**2 * norm2)
        worst = max(worst, ratio)
    return worst
