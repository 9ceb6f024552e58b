"""Fully connected networks with three interchangeable trainers.

* exact backpropagation (optionally with the activation derivative
  swapped for an arbitrary function g, to probe how fragile the chain
  rule is to that substitution),
* random-feedback training, where each hidden layer receives a fixed
  random projection of the final-layer error and multiplies it by g
  evaluated at the layer's pre-activations,
* readout-only training (frozen random features, only the last layer
  learns).

Conventions.  A batch is row-major (samples x features).  Layer l maps
x^(l) -> x^(l+1) = f(W x^(l) + bias) with W of shape (fan_out, fan_in).
Update functions return the *descent direction* (the negated mean
gradient, or its random-feedback surrogate), and :func:`train` applies
``W <- W + lr * dW``.
"""

from __future__ import annotations

import time
from dataclasses import dataclass

import numpy as np

from .activations import Activation, Linear
from .metrics import MetricsRecord
from .numerics import RngStream, ShapeError, uniform_matrix

TRAINERS = ("bp", "dfa", "readout_only")


class UndefinedAngleError(ValueError):
    """Angle requested between signals where at least one has zero norm."""


@dataclass
class Layer:
    W: np.ndarray            # (fan_out, fan_in)
    bias: np.ndarray         # (fan_out,)
    f: Activation
    frozen: bool = False

    @property
    def fan_in(self) -> int:
        return self.W.shape[1]

    @property
    def fan_out(self) -> int:
        return self.W.shape[0]


@dataclass
class ForwardTrace:
    """Cached quantities of one forward pass.

    ``x[l]`` is the input of layer l (so ``x[0]`` is the batch and
    ``x[-1]`` the logits); ``s[l]`` the pre-activations W x + bias.  Both
    trainers consume the same trace: the random-feedback rule evaluates g
    at ``s[l]``.
    """

    x: list[np.ndarray]
    s: list[np.ndarray]

    @property
    def logits(self) -> np.ndarray:
        return self.x[-1]


@dataclass
class ErrorSignal:
    e: np.ndarray   # (batch, n_out), softmax - onehot per sample
    loss: float


class FeedforwardNet:
    """Dense net plus fixed random feedback projections for each hidden layer."""

    def __init__(self, layers: list[Layer], feedback: list[np.ndarray | None],
                 g: Activation):
        if len(feedback) != len(layers):
            raise ShapeError("need one feedback slot per layer (None for the readout)")
        n_out = layers[-1].fan_out
        for l in range(len(layers) - 1):
            if layers[l + 1].fan_in != layers[l].fan_out:
                raise ShapeError(
                    f"layer {l} fan_out {layers[l].fan_out} != layer {l+1} fan_in "
                    f"{layers[l + 1].fan_in}")
            B = feedback[l]
            if B is not None and B.shape != (layers[l].fan_out, n_out):
                raise ShapeError(
                    f"feedback matrix {l} must be ({layers[l].fan_out}, {n_out}), "
                    f"got {B.shape}")
        self.layers = layers
        self.feedback = feedback
        self.g = g

    @property
    def n_layers(self) -> int:
        return len(self.layers)

    @property
    def input_dim(self) -> int:
        return self.layers[0].fan_in

    @property
    def output_dim(self) -> int:
        return self.layers[-1].fan_out

    @staticmethod
    def build(sizes: list[int], f: Activation, g: Activation, rng: RngStream,
              frozen: tuple[int, ...] = ()) -> "FeedforwardNet":
        """Construct a net with hidden activation f and a linear readout.

        ``sizes`` runs input -> hidden... -> output.  Weights start
        uniform in +/- 1/sqrt(fan_in); feedback projections are uniform
        in +/- 1/sqrt(output_dim), drawn per layer and fixed for the
        lifetime of the net.  ``frozen`` lists hidden layer indices that
        must never be updated.
        """
        if len(sizes) < 2:
            raise ValueError("need at least input and output sizes")
        n_out = sizes[-1]
        layers = []
        for l in range(len(sizes) - 1):
            fan_in, fan_out = sizes[l], sizes[l + 1]
            k = 1.0 / np.sqrt(fan_in)
            W = uniform_matrix(fan_out, fan_in, -k, k, rng)
            act = f if l < len(sizes) - 2 else Linear()
            layers.append(Layer(W, np.zeros(fan_out), act, frozen=l in frozen))
        feedback: list[np.ndarray | None] = []
        scale = 1.0 / np.sqrt(n_out)
        for l in range(len(sizes) - 2):
            feedback.append(uniform_matrix(sizes[l + 1], n_out, -1.0, 1.0, rng) * scale)
        feedback.append(None)  # readout layer learns from the true error
        return FeedforwardNet(layers, feedback, g)

    def state_arrays(self) -> dict[str, np.ndarray]:
        out = {}
        for l, layer in enumerate(self.layers):
            out[f"W{l}"] = layer.W
            out[f"b{l}"] = layer.bias
            if self.feedback[l] is not None:
                out[f"B{l}"] = self.feedback[l]
        return out

    def load_state_arrays(self, arrays: dict[str, np.ndarray]):
        for l, layer in enumerate(self.layers):
            layer.W = arrays[f"W{l}"]
            layer.bias = arrays[f"b{l}"]
            if f"B{l}" in arrays:
                self.feedback[l] = arrays[f"B{l}"]


def forward(net: FeedforwardNet, batch: np.ndarray) -> ForwardTrace:
    """Run the net on a (samples x features) batch, caching every s and x."""
    batch = np.atleast_2d(np.asarray(batch, dtype=float))
    if batch.shape[1] != net.input_dim:
        raise ShapeError(f"batch has {batch.shape[1]} features, net expects {net.input_dim}")
    xs = [batch]
    ss = []
    x = batch
    for layer in net.layers:
        s = x @ layer.W.T + layer.bias
        x = layer.f(s)
        ss.append(s)
        xs.append(x)
    return ForwardTrace(xs, ss)


def softmax(logits: np.ndarray) -> np.ndarray:
    z = logits - logits.max(axis=1, keepdims=True)
    ez = np.exp(z)
    return ez / ez.sum(axis=1, keepdims=True)


def loss_and_error(logits: np.ndarray, labels_onehot: np.ndarray) -> ErrorSignal:
    """Mean softmax cross-entropy and its per-sample output error.

    The error rows are softmax(logits) - onehot, so they sum to zero per
    sample; update rules divide by the batch size themselves.
    """
    logits = np.atleast_2d(logits)
    labels_onehot = np.atleast_2d(labels_onehot)
    if logits.shape != labels_onehot.shape:
        raise ShapeError(f"logits {logits.shape} vs labels {labels_onehot.shape}")
    row_sums = labels_onehot.sum(axis=1)
    if not (np.all(np.isin(labels_onehot, (0.0, 1.0))) and np.allclose(row_sums, 1.0)):
        raise ValueError("labels must be one-hot rows")
    p = softmax(logits)
    eps = 1e-300  # guard the log; CE is otherwise exact
    picked = np.sum(p * labels_onehot, axis=1)
    loss = float(np.mean(-np.log(picked + eps)))
    return ErrorSignal(p - labels_onehot, loss)


def _deltas_backprop(net: FeedforwardNet, trace: ForwardTrace, err: ErrorSignal,
                     substitute_g: bool = False) -> list[np.ndarray]:
    """Pre-activation error of every layer by the chain rule.

    With ``substitute_g`` the activation derivative is replaced by the
    net's g at every hidden layer; this is the fragile variant used as a
    control, not a gradient.
    """
    if len(trace.s) != net.n_layers:
        raise ShapeError("trace does not cover every layer")
    L = net.n_layers
    deltas: list[np.ndarray] = [None] * L
    d = err.e
    deltas[L - 1] = d * _activation_gain(net, L - 1, trace, substitute_g=False)
    for l in range(L - 2, -1, -1):
        back = deltas[l + 1] @ net.layers[l + 1].W
        deltas[l] = back * _activation_gain(net, l, trace, substitute_g)
    return deltas


def _activation_gain(net, l, trace, substitute_g):
    layer = net.layers[l]
    if isinstance(layer.f, Linear):
        return 1.0
    fn = net.g if substitute_g else layer.f.derivative()
    return fn(trace.s[l])


def _deltas_dfa(net: FeedforwardNet, trace: ForwardTrace, err: ErrorSignal) -> list[np.ndarray]:
    """Pre-activation updates of the random-feedback rule.

    Hidden layer l uses (B^(l) e) ⊙ g(s^(l)); the readout layer is
    trained with the true error, the standard convention for the last
    step of the chain.
    """
    L = net.n_layers
    deltas: list[np.ndarray] = [None] * L
    deltas[L - 1] = err.e * _activation_gain(net, L - 1, trace, substitute_g=False)
    for l in range(L - 1):
        B = net.feedback[l]
        if B is None:
            raise ShapeError(f"layer {l} has no feedback matrix")
        if B.shape[1] != err.e.shape[1]:
            raise ShapeError(f"feedback matrix {l} is {B.shape}, error dim {err.e.shape[1]}")
        projected = err.e @ B.T
        deltas[l] = projected * net.g(trace.s[l])
    return deltas


def _updates_from_deltas(net, trace, deltas):
    """Descent-direction weight/bias updates, batch-averaged; frozen layers get zeros."""
    n = trace.x[0].shape[0]
    dWs, dbs = [], []
    for l, layer in enumerate(net.layers):
        if layer.frozen:
            dWs.append(np.zeros_like(layer.W))
            dbs.append(np.zeros_like(layer.bias))
            continue
        dWs.append(-(deltas[l].T @ trace.x[l]) / n)
        dbs.append(-deltas[l].mean(axis=0))
    return dWs, dbs


def bp_update(net: FeedforwardNet, trace: ForwardTrace, err: ErrorSignal,
              substitute_g: bool = False):
    """Backprop updates; exact chain rule unless ``substitute_g``."""
    return _updates_from_deltas(net, trace, _deltas_backprop(net, trace, err, substitute_g))


def dfa_update(net: FeedforwardNet, trace: ForwardTrace, err: ErrorSignal):
    """Random-feedback updates; frozen layers receive zero."""
    return _updates_from_deltas(net, trace, _deltas_dfa(net, trace, err))


def readout_only_update(net: FeedforwardNet, trace: ForwardTrace, err: ErrorSignal):
    """Train only the final layer; everything below stays fixed."""
    L = net.n_layers
    dWs = [np.zeros_like(layer.W) for layer in net.layers]
    dbs = [np.zeros_like(layer.bias) for layer in net.layers]
    if not net.layers[L - 1].frozen:
        n = trace.x[0].shape[0]
        d = err.e * _activation_gain(net, L - 1, trace, substitute_g=False)
        dWs[L - 1] = -(d.T @ trace.x[L - 1]) / n
        dbs[L - 1] = -d.mean(axis=0)
    return dWs, dbs


def _mean_angle_deg(a: np.ndarray, b: np.ndarray) -> float:
    """Mean per-sample angle between row vectors, in degrees."""
    a = np.atleast_2d(a)
    b = np.atleast_2d(b)
    na = np.linalg.norm(a, axis=1)
    nb = np.linalg.norm(b, axis=1)
    if np.any(na == 0) or np.any(nb == 0):
        raise UndefinedAngleError("zero-norm signal has no direction")
    cosang = np.clip(np.sum(a * b, axis=1) / (na * nb), -1.0, 1.0)
    return float(np.degrees(np.arccos(cosang)).mean())


def backprop_post_errors(net: FeedforwardNet, trace: ForwardTrace,
                         err: ErrorSignal) -> list[np.ndarray]:
    """True error at every hidden layer's output, ∂E/∂x^(l+1), by the chain rule."""
    deltas = _deltas_backprop(net, trace, err, substitute_g=False)
    return [deltas[l + 1] @ net.layers[l + 1].W for l in range(net.n_layers - 1)]


def alignment_angle(net: FeedforwardNet, trace: ForwardTrace, err: ErrorSignal,
                    layer: int) -> float:
    """Angle between the true backprop signal and the random projection.

    Compares ∂E/∂x^(layer+1) against B^(layer) e at a hidden layer's
    output: below 90° the projected error points into the same half-space
    as the gradient signal it stands in for.  Returns the batch-mean
    angle in degrees.
    """
    if not 0 <= layer < net.n_layers - 1:
        raise IndexError(f"layer {layer} is not a hidden layer")
    bp_sig = backprop_post_errors(net, trace, err)[layer]
    dfa_sig = err.e @ net.feedback[layer].T
    return _mean_angle_deg(bp_sig, dfa_sig)


def update_alignment_angles(net: FeedforwardNet, trace: ForwardTrace, err: ErrorSignal,
                            trainer: str, substitute_g: bool = False) -> list[float]:
    """Per-hidden-layer angle between the trainer's pre-activation delta
    and the true backprop delta.

    Unlike :func:`alignment_angle` this includes the local g-vs-f' gain,
    so it also measures the g-substituted backprop control, whose
    *projection* signal would trivially coincide with the truth at the
    topmost hidden layer.
    """
    d_true = _deltas_backprop(net, trace, err, substitute_g=False)
    if trainer == "dfa":
        d_used = _deltas_dfa(net, trace, err)
    elif trainer == "bp":
        d_used = _deltas_backprop(net, trace, err, substitute_g=substitute_g)
    else:
        raise ValueError(f"no alignment diagnostic for trainer '{trainer}'")
    return [_mean_angle_deg(d_used[l], d_true[l]) for l in range(net.n_layers - 1)]


def accuracy(logits: np.ndarray, labels: np.ndarray) -> float:
    return float(np.mean(np.argmax(logits, axis=1) == labels))


def evaluate(net: FeedforwardNet, images: np.ndarray, labels: np.ndarray,
             batch: int = 1024) -> float:
    hits = 0
    for i in range(0, len(images), batch):
        logits = forward(net, images[i:i + batch]).logits
        hits += int(np.sum(np.argmax(logits, axis=1) == labels[i:i + batch]))
    return hits / len(images)


def train(net: FeedforwardNet, train_images: np.ndarray, train_labels: np.ndarray,
          *, epochs: int, batch_size: int, lr: float, seed: int,
          trainer: str = "dfa", momentum: float = 0.0, substitute_g: bool = False,
          test_images: np.ndarray | None = None, test_labels: np.ndarray | None = None,
          angle_every: int = 0, angle_mode: str = "projection") -> list[MetricsRecord]:
    """SGD loop shared by all three trainers.

    Per epoch: deterministic seeded reshuffle, minibatch updates, running
    train accuracy/loss from the training forward passes, one test-set
    evaluation.  ``angle_every > 0`` measures alignment angles on every
    k-th minibatch (``projection`` = the random-feedback diagnostic,
    ``update`` = delta-vs-delta, needed for the g-substituted backprop
    control).  A non-finite loss marks the epoch diverged and stops the
    run; partial history is returned.
    """
    if trainer not in TRAINERS:
        raise ValueError(f"trainer must be one of {TRAINERS}")
    n_out = net.output_dim
    n = len(train_images)
    eye = np.eye(n_out)
    shuffle_rng = RngStream(seed).child(1)
    velocity_W = [np.zeros_like(layer.W) for layer in net.layers]
    velocity_b = [np.zeros_like(layer.bias) for layer in net.layers]
    history: list[MetricsRecord] = []
    n_hidden = net.n_layers - 1

    for epoch in range(1, epochs + 1):
        t0 = time.perf_counter()
        order = shuffle_rng.permutation(n)
        loss_sum = 0.0
        hit_sum = 0
        seen = 0
        angle_sums = np.zeros(n_hidden)
        angle_count = 0
        diverged = False
        for bi, start in enumerate(range(0, n, batch_size)):
            idx = order[start:start + batch_size]
            xb = train_images[idx]
            yb = train_labels[idx]
            trace = forward(net, xb)
            err = loss_and_error(trace.logits, eye[yb])
            if not np.isfinite(err.loss):
                diverged = True
                break
            loss_sum += err.loss * len(idx)
            hit_sum += int(np.sum(np.argmax(trace.logits, axis=1) == yb))
            seen += len(idx)

            if angle_every and bi % angle_every == 0 and n_hidden > 0:
                try:
                    if angle_mode == "update":
                        angles = update_alignment_angles(
                            net, trace, err, "bp" if trainer == "bp" else "dfa",
                            substitute_g=substitute_g)
                    else:
                        angles = [alignment_angle(net, trace, err, l)
                                  for l in range(n_hidden)]
                    angle_sums += angles
                    angle_count += 1
                except UndefinedAngleError:
                    pass

            if trainer == "bp":
                dWs, dbs = bp_update(net, trace, err, substitute_g=substitute_g)
            elif trainer == "dfa":
                dWs, dbs = dfa_update(net, trace, err)
            else:
                dWs, dbs = readout_only_update(net, trace, err)
            for l, layer in enumerate(net.layers):
                if layer.frozen:
                    continue
                if momentum:
                    velocity_W[l] = momentum * velocity_W[l] + dWs[l]
                    velocity_b[l] = momentum * velocity_b[l] + dbs[l]
                    layer.W += lr * velocity_W[l]
                    layer.bias += lr * velocity_b[l]
                else:
                    layer.W += lr * dWs[l]
                    layer.bias += lr * dbs[l]

        if diverged:
            history.append(MetricsRecord(
                epoch=epoch, loss=float("nan"),
                train_acc=hit_sum / seen if seen else 0.0,
                test_acc=None, angles=None, diverged=True,
                wall_time_s=time.perf_counter() - t0))
            break
        test_acc = None
        if test_images is not None:
            test_acc = evaluate(net, test_images, test_labels)
        angles = tuple(angle_sums / angle_count) if angle_count else None
        history.append(MetricsRecord(
            epoch=epoch, loss=loss_sum / seen, train_acc=hit_sum / seen,
            test_acc=test_acc, angles=angles, diverged=False,
            wall_time_s=time.perf_counter() - t0))
    return history
