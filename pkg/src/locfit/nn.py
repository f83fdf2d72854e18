"""Dense feed-forward network engine with reverse-mode gradients.

Networks are a shared trunk followed by one or more heads; parameters are
stored flat in trunk-then-heads order. All arithmetic is in 64-bit floats.
Dropout is inverted (activations scaled by 1/(1-rate) at train time) so
inference applies no correction.
"""

import math
from dataclasses import dataclass, field

import numpy as np

from .errors import DomainError, NumericError

ACTIVATIONS = ("sigmoid", "relu", "linear", "softmax")


@dataclass(frozen=True)
class LayerSpec:
    """One dense layer: out = activation(W x + b), dropout on the output."""

    in_dim: int
    out_dim: int
    activation: str = "linear"
    dropout_rate: float = 0.0

    def __post_init__(self):
        if self.in_dim < 1 or self.out_dim < 1:
            raise DomainError(f"layer dims must be >= 1, got {self.in_dim}x{self.out_dim}")
        if self.activation not in ACTIVATIONS:
            raise DomainError(f"unknown activation {self.activation!r}")
        if not 0 <= self.dropout_rate < 1:
            raise DomainError(f"dropout_rate must be in [0, 1), got {self.dropout_rate}")


@dataclass(frozen=True)
class NetworkSpec:
    """Trunk plus one chain of layers per output head."""

    trunk: tuple[LayerSpec, ...]
    heads: tuple[tuple[LayerSpec, ...], ...]

    def __post_init__(self):
        if not self.heads or any(len(h) == 0 for h in self.heads):
            raise DomainError("network needs at least one non-empty head")
        for chain in (self.trunk, *self.heads):
            for prev, cur in zip(chain, chain[1:]):
                if prev.out_dim != cur.in_dim:
                    raise DomainError(f"layer dims do not chain: {prev.out_dim} -> {cur.in_dim}")
        trunk_out = self.trunk[-1].out_dim if self.trunk else None
        for head in self.heads:
            if trunk_out is not None and head[0].in_dim != trunk_out:
                raise DomainError("head input does not match trunk output")
            if trunk_out is None and head[0].in_dim != self.heads[0][0].in_dim:
                raise DomainError("heads disagree on input width")
        for layer in self.trunk + tuple(l for h in self.heads for l in h[:-1]):
            if layer.activation == "softmax":
                raise DomainError("softmax is only valid on an output layer")

    @property
    def input_dim(self) -> int:
        return self.trunk[0].in_dim if self.trunk else self.heads[0][0].in_dim

    @property
    def all_layers(self) -> tuple[LayerSpec, ...]:
        return self.trunk + tuple(l for h in self.heads for l in h)


@dataclass
class ModelParams:
    """Ordered (weight, bias) pairs; weights are (out_dim, in_dim) float64."""

    layers: list[tuple[np.ndarray, np.ndarray]]

    @property
    def n_params(self) -> int:
        return sum(w.size + b.size for w, b in self.layers)

    def copy(self) -> "ModelParams":
        return ModelParams([(w.copy(), b.copy()) for w, b in self.layers])

    def zeros_like(self) -> "ModelParams":
        return ModelParams([(np.zeros_like(w), np.zeros_like(b)) for w, b in self.layers])


def init_layer(ls: LayerSpec, rng) -> tuple[np.ndarray, np.ndarray]:
    """Glorot-uniform weight (limit sqrt(6/(in+out))) and zero bias."""
    rng = np.random.default_rng(rng)
    limit = math.sqrt(6.0 / (ls.in_dim + ls.out_dim))
    w = rng.uniform(-limit, limit, size=(ls.out_dim, ls.in_dim))
    return w, np.zeros(ls.out_dim, dtype=np.float64)


def init_params(spec: NetworkSpec, seed) -> ModelParams:
    """Glorot-uniform weights and zero biases for every layer, in order."""
    rng = np.random.default_rng(seed)
    return ModelParams([init_layer(ls, rng) for ls in spec.all_layers])


def softmax(logits: np.ndarray) -> np.ndarray:
    """Row-wise stable softmax; rows sum to 1 and are shift-invariant."""
    z = np.asarray(logits, dtype=np.float64)
    z = z - z.max(axis=-1, keepdims=True)
    e = np.exp(z)
    return e / e.sum(axis=-1, keepdims=True)


def sigmoid(z: np.ndarray) -> np.ndarray:
    """Overflow-safe logistic function."""
    z = np.asarray(z, dtype=np.float64)
    out = np.empty_like(z)
    pos = z >= 0
    out[pos] = 1.0 / (1.0 + np.exp(-z[pos]))
    ez = np.exp(z[~pos])
    out[~pos] = ez / (1.0 + ez)
    return out


def _activate(name: str, z: np.ndarray) -> np.ndarray:
    if name == "linear":
        return z
    if name == "relu":
        return np.maximum(z, 0.0)
    if name == "sigmoid":
        return sigmoid(z)
    return softmax(z)


def _activation_backward(name: str, grad_a: np.ndarray, z: np.ndarray,
                         a: np.ndarray) -> np.ndarray:
    if name == "linear":
        return grad_a
    if name == "relu":
        # subgradient at 0 defined as 0
        return grad_a * (z > 0)
    if name == "sigmoid":
        return grad_a * a * (1.0 - a)
    # softmax Jacobian: dz_i = p_i (g_i - sum_j g_j p_j), row-wise
    return a * (grad_a - (grad_a * a).sum(axis=-1, keepdims=True))


@dataclass
class _LayerTrace:
    x: np.ndarray
    z: np.ndarray
    a: np.ndarray
    mask: np.ndarray | None  # scaled inverted-dropout mask, None if inactive


@dataclass
class ForwardTrace:
    """Per-layer cache from one forward pass, consumed by backward()."""

    spec: NetworkSpec
    mode: str
    batch_size: int
    layers: list[_LayerTrace] = field(default_factory=list)


def _run_chain(chain, params_slice, x, train: bool, rng, trace: ForwardTrace):
    for ls, (w, b) in zip(chain, params_slice):
        if x.shape[1] != ls.in_dim:
            raise DomainError(f"input width {x.shape[1]} != layer in_dim {ls.in_dim}")
        if w.shape != (ls.out_dim, ls.in_dim) or b.shape != (ls.out_dim,):
            raise DomainError("parameter shapes do not match layer spec")
        z = x @ w.T + b
        a = _activate(ls.activation, z)
        mask = None
        if train and ls.dropout_rate > 0.0:
            keep = 1.0 - ls.dropout_rate
            mask = (rng.random(a.shape) < keep).astype(np.float64) / keep
            out = a * mask
        else:
            out = a
        trace.layers.append(_LayerTrace(x, z, a, mask))
        x = out
    return x


def forward(params: ModelParams, spec: NetworkSpec, batch: np.ndarray,
            mode: str = "infer", rng=None) -> tuple[list[np.ndarray], ForwardTrace]:
    """Run the network on a (n, input_dim) batch.

    Returns one output array per head plus the trace backward() needs.
    In infer mode dropout is the identity and no PRNG state is consumed.
    """
    if mode not in ("train", "infer"):
        raise DomainError(f"mode must be 'train' or 'infer', got {mode!r}")
    batch = np.asarray(batch, dtype=np.float64)
    if batch.ndim != 2 or batch.shape[1] != spec.input_dim:
        raise DomainError(f"batch shape {batch.shape} does not match input width "
                          f"{spec.input_dim}")
    if len(params.layers) != len(spec.all_layers):
        raise DomainError("parameter count does not match network spec")
    train = mode == "train"
    if train and rng is not None:
        rng = np.random.default_rng(rng)
    elif train and any(ls.dropout_rate > 0 for ls in spec.all_layers):
        raise DomainError("train mode with dropout requires an rng/seed")

    trace = ForwardTrace(spec=spec, mode=mode, batch_size=batch.shape[0])
    n_trunk = len(spec.trunk)
    trunk_out = _run_chain(spec.trunk, params.layers[:n_trunk], batch, train, rng, trace)

    outputs = []
    offset = n_trunk
    for head in spec.heads:
        out = _run_chain(head, params.layers[offset:offset + len(head)],
                         trunk_out, train, rng, trace)
        offset += len(head)
        if not np.all(np.isfinite(out)):
            raise NumericError("non-finite network output")
        outputs.append(out)
    return outputs, trace


def mse_loss(pred: np.ndarray, target: np.ndarray) -> float:
    """Mean over all entries of the squared difference."""
    pred, target = np.asarray(pred, dtype=np.float64), np.asarray(target, dtype=np.float64)
    if pred.shape != target.shape:
        raise DomainError(f"shape mismatch {pred.shape} vs {target.shape}")
    return float(np.mean((pred - target) ** 2))


def mse_grad(pred: np.ndarray, target: np.ndarray) -> np.ndarray:
    """Gradient of mse_loss with respect to pred."""
    pred, target = np.asarray(pred, dtype=np.float64), np.asarray(target, dtype=np.float64)
    if pred.shape != target.shape:
        raise DomainError(f"shape mismatch {pred.shape} vs {target.shape}")
    return 2.0 * (pred - target) / pred.size


CCE_PROB_FLOOR = 1e-12


def cce_loss(probs: np.ndarray, one_hot: np.ndarray) -> float:
    """Categorical crossentropy, probabilities clipped at 1e-12."""
    probs, one_hot = np.asarray(probs, dtype=np.float64), np.asarray(one_hot, dtype=np.float64)
    if probs.shape != one_hot.shape:
        raise DomainError(f"shape mismatch {probs.shape} vs {one_hot.shape}")
    p = np.clip(probs, CCE_PROB_FLOOR, 1.0)
    rows = probs.shape[0] if probs.ndim == 2 else 1
    return float(-(one_hot * np.log(p)).sum() / rows)


def cce_grad(probs: np.ndarray, one_hot: np.ndarray) -> np.ndarray:
    """Gradient of cce_loss with respect to probs."""
    probs, one_hot = np.asarray(probs, dtype=np.float64), np.asarray(one_hot, dtype=np.float64)
    if probs.shape != one_hot.shape:
        raise DomainError(f"shape mismatch {probs.shape} vs {one_hot.shape}")
    p = np.clip(probs, CCE_PROB_FLOOR, 1.0)
    rows = probs.shape[0] if probs.ndim == 2 else 1
    grad = -(one_hot / p) / rows
    # clipped entries contribute a constant to the loss
    grad[(probs < CCE_PROB_FLOOR) | (probs > 1.0)] = 0.0
    return grad


def _chain_backward(chain, params_slice, traces, grad_out):
    grads = []
    for ls, (w, _b), lt in zip(reversed(chain), reversed(params_slice),
                               reversed(traces)):
        if lt.mask is not None:
            grad_out = grad_out * lt.mask
        grad_z = _activation_backward(ls.activation, grad_out, lt.z, lt.a)
        grads.append((grad_z.T @ lt.x, grad_z.sum(axis=0)))
        grad_out = grad_z @ w
    grads.reverse()
    return grads, grad_out


def backward(trace: ForwardTrace, params: ModelParams, spec: NetworkSpec,
             head_grads: list[np.ndarray]) -> ModelParams:
    """Exact gradients of the total loss given d(loss)/d(head output).

    Loss weights belong in head_grads (scale each head's gradient before
    calling). Shared trunk gradients sum the contributions of all heads.
    """
    if trace.spec is not spec or trace.mode != "train":
        raise DomainError("trace does not match spec or was not taken in train mode")
    if len(head_grads) != len(spec.heads):
        raise DomainError(f"expected {len(spec.heads)} head gradients, got {len(head_grads)}")
    if len(trace.layers) != len(spec.all_layers):
        raise DomainError("stale trace: layer count mismatch")

    n_trunk = len(spec.trunk)
    offset = n_trunk
    head_param_grads = []
    trunk_grad_out = 0.0
    for head, g in zip(spec.heads, head_grads):
        g = np.asarray(g, dtype=np.float64)
        hl = trace.layers[offset:offset + len(head)]
        if g.shape != (trace.batch_size, head[-1].out_dim):
            raise DomainError("head gradient shape mismatch")
        grads, grad_in = _chain_backward(head, params.layers[offset:offset + len(head)],
                                         hl, g)
        head_param_grads.extend(grads)
        trunk_grad_out = trunk_grad_out + grad_in
        offset += len(head)

    trunk_grads, _ = _chain_backward(spec.trunk, params.layers[:n_trunk],
                                     trace.layers[:n_trunk], trunk_grad_out)
    return ModelParams(trunk_grads + head_param_grads)


@dataclass(frozen=True)
class NadamConfig:
    """Optimizer hyperparameters (defaults of the common Nadam formulation)."""

    lr: float = 0.002
    beta1: float = 0.9
    beta2: float = 0.999
    epsilon: float = 1e-8
    schedule_decay: float = 0.004

    def make_state(self, params: "ModelParams") -> "NadamState":
        return NadamState(m=params.zeros_like(), v=params.zeros_like(),
                          lr=self.lr, beta1=self.beta1, beta2=self.beta2,
                          epsilon=self.epsilon, schedule_decay=self.schedule_decay)


@dataclass
class NadamState:
    """Optimizer state: step count, per-parameter moments, hyperparameters.

    mu_product carries the running product of the momentum schedule
    mu_t = beta1 * (1 - 0.5 * 0.96^(t * schedule_decay)).
    """

    m: ModelParams
    v: ModelParams
    t: int = 0
    lr: float = 0.002
    beta1: float = 0.9
    beta2: float = 0.999
    epsilon: float = 1e-8
    schedule_decay: float = 0.004
    mu_product: float = 1.0

    @classmethod
    def for_params(cls, params: ModelParams, **hyper) -> "NadamState":
        return cls(m=params.zeros_like(), v=params.zeros_like(), **hyper)


def nadam_step(params: ModelParams, grads: ModelParams,
               state: NadamState) -> tuple[ModelParams, NadamState]:
    """One Nesterov-accelerated Adam update; mutates params and state in place.

    The Nesterov-corrected first moment combines mu_{t+1}-weighted bias-
    corrected momentum with (1 - mu_t)-weighted bias-corrected gradient;
    the update is lr * m_bar / (sqrt(v_hat) + epsilon).
    """
    if len(grads.layers) != len(params.layers):
        raise DomainError("gradient structure does not match parameters")
    b1, b2, sd = state.beta1, state.beta2, state.schedule_decay
    t = state.t + 1
    mu_t = b1 * (1.0 - 0.5 * 0.96 ** (t * sd))
    mu_next = b1 * (1.0 - 0.5 * 0.96 ** ((t + 1) * sd))
    mu_prod_t = state.mu_product * mu_t
    mu_prod_next = mu_prod_t * mu_next

    for (w, b), (gw, gb), (mw, mb), (vw, vb) in zip(params.layers, grads.layers,
                                                    state.m.layers, state.v.layers):
        for p, g, m, v in ((w, gw, mw, vw), (b, gb, mb, vb)):
            if not np.all(np.isfinite(g)):
                raise NumericError("non-finite gradient")
            g_hat = g / (1.0 - mu_prod_t)
            m *= b1
            m += (1.0 - b1) * g
            m_hat = m / (1.0 - mu_prod_next)
            v *= b2
            v += (1.0 - b2) * g * g
            v_hat = v / (1.0 - b2 ** t)
            m_bar = (1.0 - mu_t) * g_hat + mu_next * m_hat
            p -= state.lr * m_bar / (np.sqrt(v_hat) + state.epsilon)

    state.t = t
    state.mu_product = mu_prod_t
    return params, state
