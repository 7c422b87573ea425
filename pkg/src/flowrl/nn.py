"""Minimal dense-network engine.

Parameters are plain float64 numpy arrays held in immutable containers.
Every operation is a pure function: it never mutates its inputs and returns
fresh values, so parameter objects can be shared freely across threads.

The engine provides exactly what the rest of the package needs: forward
evaluation of an MLP, reverse-mode gradients with respect to parameters and
inputs, and a bias-corrected adaptive-moment optimizer step.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
from scipy.special import erf

Array = np.ndarray

HIDDEN_ACTIVATIONS = ("relu", "gelu", "tanh")
OUTPUT_ACTIVATIONS = ("identity", "tanh")

_INV_SQRT2 = 1.0 / np.sqrt(2.0)
_INV_SQRT2PI = 1.0 / np.sqrt(2.0 * np.pi)


def _frozen(a: Array) -> Array:
    """Return ``a`` as a read-only float64 array (copies only if needed)."""
    a = np.ascontiguousarray(a, dtype=np.float64)
    a.flags.writeable = False
    return a


@dataclass(frozen=True)
class MlpSpec:
    """Shape and activation description of a dense network.

    Layer k maps width_{k-1} -> width_k where the width sequence is
    (input_dim, *hidden_widths, output_dim).
    """

    input_dim: int
    hidden_widths: tuple[int, ...]
    output_dim: int
    hidden_activation: str = "gelu"
    output_activation: str = "identity"

    def __post_init__(self):
        object.__setattr__(self, "hidden_widths", tuple(int(w) for w in self.hidden_widths))
        if self.input_dim < 1 or self.output_dim < 1:
            raise ValueError(f"input/output dims must be >= 1, got {self.input_dim}/{self.output_dim}")
        if len(self.hidden_widths) < 1:
            raise ValueError("at least one hidden layer is required")
        if any(w < 1 for w in self.hidden_widths):
            raise ValueError(f"hidden widths must be >= 1, got {self.hidden_widths}")
        if self.hidden_activation not in HIDDEN_ACTIVATIONS:
            raise ValueError(f"unknown hidden activation {self.hidden_activation!r}")
        if self.output_activation not in OUTPUT_ACTIVATIONS:
            raise ValueError(f"unknown output activation {self.output_activation!r}")

    @property
    def layer_widths(self) -> tuple[int, ...]:
        return (self.input_dim, *self.hidden_widths, self.output_dim)

    @property
    def num_layers(self) -> int:
        return len(self.hidden_widths) + 1


@dataclass(frozen=True)
class MlpParams:
    """Per-layer weight matrices and bias vectors.

    weights[k] has shape (width_k, width_{k-1}) and biases[k] shape (width_k,).
    The same container is reused for gradients and optimizer moments.
    """

    weights: tuple[Array, ...]
    biases: tuple[Array, ...]

    def __post_init__(self):
        object.__setattr__(self, "weights", tuple(_frozen(w) for w in self.weights))
        object.__setattr__(self, "biases", tuple(_frozen(b) for b in self.biases))
        if len(self.weights) != len(self.biases):
            raise ValueError("weights and biases must have the same number of layers")
        for k, (w, b) in enumerate(zip(self.weights, self.biases)):
            if w.ndim != 2 or b.ndim != 1 or w.shape[0] != b.shape[0]:
                raise ValueError(f"layer {k}: weight {w.shape} and bias {b.shape} are inconsistent")
            if k > 0 and w.shape[1] != self.weights[k - 1].shape[0]:
                raise ValueError(f"layer {k}: fan-in {w.shape[1]} does not match previous width")

    def check_spec(self, spec: MlpSpec) -> None:
        widths = spec.layer_widths
        if len(self.weights) != spec.num_layers:
            raise ValueError(f"expected {spec.num_layers} layers, got {len(self.weights)}")
        for k, w in enumerate(self.weights):
            if w.shape != (widths[k + 1], widths[k]):
                raise ValueError(f"layer {k}: weight shape {w.shape} != {(widths[k + 1], widths[k])}")

    def num_entries(self) -> int:
        return sum(w.size for w in self.weights) + sum(b.size for b in self.biases)


@dataclass(frozen=True)
class AdamState:
    """First/second-moment accumulators shaped exactly like the parameters."""

    m: MlpParams
    v: MlpParams
    step_count: int = 0

    def __post_init__(self):
        if self.step_count < 0:
            raise ValueError("step_count must be non-negative")


def init_params(spec: MlpSpec, seed: int) -> MlpParams:
    """Fan-in-scaled uniform weights, zero biases; pure function of (spec, seed)."""
    rng = np.random.default_rng(seed)
    widths = spec.layer_widths
    weights = []
    biases = []
    for k in range(spec.num_layers):
        fan_in = widths[k]
        bound = 1.0 / np.sqrt(fan_in)
        weights.append(rng.uniform(-bound, bound, size=(widths[k + 1], fan_in)))
        biases.append(np.zeros(widths[k + 1]))
    return MlpParams(tuple(weights), tuple(biases))


def zeros_like_params(params: MlpParams) -> MlpParams:
    return MlpParams(
        tuple(np.zeros_like(w) for w in params.weights),
        tuple(np.zeros_like(b) for b in params.biases),
    )


def adam_init(params: MlpParams) -> AdamState:
    return AdamState(m=zeros_like_params(params), v=zeros_like_params(params), step_count=0)


def _activate(name: str, z: Array) -> Array:
    if name == "identity":
        return z
    if name == "relu":
        return np.maximum(z, 0.0)
    if name == "tanh":
        return np.tanh(z)
    # gelu, exact form: z * Phi(z)
    return 0.5 * z * (1.0 + erf(z * _INV_SQRT2))


def _activate_grad(name: str, z: Array) -> Array:
    if name == "identity":
        return np.ones_like(z)
    if name == "relu":
        return (z > 0.0).astype(np.float64)
    if name == "tanh":
        t = np.tanh(z)
        return 1.0 - t * t
    phi = 0.5 * (1.0 + erf(z * _INV_SQRT2))
    pdf = _INV_SQRT2PI * np.exp(-0.5 * z * z)
    return phi + z * pdf


def _as_batch(x: Array, dim: int, name: str) -> tuple[Array, bool]:
    x = np.asarray(x, dtype=np.float64)
    if x.ndim == 1:
        x = x[None, :]
        single = True
    elif x.ndim == 2:
        single = False
    else:
        raise ValueError(f"{name} must be 1-D or 2-D, got ndim={x.ndim}")
    if x.shape[1] != dim:
        raise ValueError(f"{name} last dimension {x.shape[1]} != expected {dim}")
    return x, single


def _run_forward(params: MlpParams, spec: MlpSpec, x: Array) -> tuple[list[Array], list[Array]]:
    """Forward pass keeping every pre-activation and activation for backprop."""
    acts = [x]
    pre = []
    h = x
    last = spec.num_layers - 1
    for k, (w, b) in enumerate(zip(params.weights, params.biases)):
        z = h @ w.T + b
        pre.append(z)
        act = spec.output_activation if k == last else spec.hidden_activation
        h = _activate(act, z)
        acts.append(h)
    return pre, acts


def forward(params: MlpParams, spec: MlpSpec, x: Array) -> Array:
    """Evaluate the network; supports a single vector or a batched 2-D input."""
    params.check_spec(spec)
    xb, single = _as_batch(x, spec.input_dim, "x")
    _, acts = _run_forward(params, spec, xb)
    y = acts[-1]
    if not np.isfinite(y).all():
        raise FloatingPointError("forward produced non-finite output")
    return y[0] if single else y


def backward(
    params: MlpParams,
    spec: MlpSpec,
    x: Array,
    upstream,
    *,
    need_param_grads: bool = True,
    need_input_grad: bool = True,
) -> tuple[Array, MlpParams | None, Array | None]:
    """One combined forward/reverse sweep.

    Returns (output, d(upstream.output)/dparams, d(upstream.output)/dx); the
    last two are None when not requested.  upstream may be a callable taking
    the batched output, so losses whose cotangent depends on the output pay
    for a single forward pass.  This is the workhorse behind grad_params /
    grad_input and is exposed so callers can avoid paying for weight
    gradients when only input gradients are needed (and vice versa).
    """
    params.check_spec(spec)
    xb, single = _as_batch(x, spec.input_dim, "x")
    pre, acts = _run_forward(params, spec, xb)
    if callable(upstream):
        ub, usingle = _as_batch(upstream(acts[-1]), spec.output_dim, "upstream")
        usingle = single  # cotangent was computed from the batched output
    else:
        ub, usingle = _as_batch(upstream, spec.output_dim, "upstream")
    if ub.shape[0] != xb.shape[0] or usingle != single:
        raise ValueError(f"upstream shape {np.shape(ub)} does not match output shape")
    last = spec.num_layers - 1

    w_grads: list[Array | None] = [None] * spec.num_layers
    b_grads: list[Array | None] = [None] * spec.num_layers
    delta = ub
    for k in range(last, -1, -1):
        act = spec.output_activation if k == last else spec.hidden_activation
        delta = delta * _activate_grad(act, pre[k])
        if need_param_grads:
            w_grads[k] = delta.T @ acts[k]
            b_grads[k] = delta.sum(axis=0)
        if k > 0 or need_input_grad:
            delta = delta @ params.weights[k]

    y = acts[-1]
    grads = MlpParams(tuple(w_grads), tuple(b_grads)) if need_param_grads else None
    x_grad = None
    if need_input_grad:
        x_grad = delta[0] if single else delta
    return (y[0] if single else y), grads, x_grad


def grad_params(params: MlpParams, spec: MlpSpec, x: Array, upstream: Array) -> MlpParams:
    """d(upstream . output)/dparams via reverse accumulation."""
    _, grads, _ = backward(params, spec, x, upstream, need_input_grad=False)
    return grads


def grad_input(params: MlpParams, spec: MlpSpec, x: Array, upstream: Array) -> Array:
    """d(upstream . output)/dx; same shape as x."""
    _, _, x_grad = backward(params, spec, x, upstream, need_param_grads=False)
    return x_grad


def tree_add(a: MlpParams, b: MlpParams, scale: float = 1.0) -> MlpParams:
    """a + scale * b, entrywise over every layer."""
    return MlpParams(
        tuple(wa + scale * wb for wa, wb in zip(a.weights, b.weights)),
        tuple(ba + scale * bb for ba, bb in zip(a.biases, b.biases)),
    )


def adam_step(
    params: MlpParams,
    grads: MlpParams,
    state: AdamState,
    lr: float,
    beta1: float = 0.9,
    beta2: float = 0.999,
    eps: float = 1e-8,
) -> tuple[MlpParams, AdamState]:
    """Bias-corrected adaptive-moment update; rejects non-finite gradients."""
    if lr <= 0.0:
        raise ValueError(f"learning rate must be positive, got {lr}")
    for g in (*grads.weights, *grads.biases):
        if not np.isfinite(g).all():
            raise FloatingPointError("non-finite gradient entries; update rejected")

    t = state.step_count + 1
    c1 = 1.0 - beta1**t
    c2 = 1.0 - beta2**t

    new_w, new_b, m_w, m_b, v_w, v_b = [], [], [], [], [], []
    for p, g, m, v, out_p, out_m, out_v in (
        (params.weights, grads.weights, state.m.weights, state.v.weights, new_w, m_w, v_w),
        (params.biases, grads.biases, state.m.biases, state.v.biases, new_b, m_b, v_b),
    ):
        for pk, gk, mk, vk in zip(p, g, m, v):
            mk2 = beta1 * mk + (1.0 - beta1) * gk
            vk2 = beta2 * vk + (1.0 - beta2) * gk * gk
            step = lr * (mk2 / c1) / (np.sqrt(vk2 / c2) + eps)
            out_p.append(pk - step)
            out_m.append(mk2)
            out_v.append(vk2)

    new_params = MlpParams(tuple(new_w), tuple(new_b))
    new_state = AdamState(
        m=MlpParams(tuple(m_w), tuple(m_b)),
        v=MlpParams(tuple(v_w), tuple(v_b)),
        step_count=t,
    )
    return new_params, new_state
