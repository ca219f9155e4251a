"""Dueling noisy Q-network with explicit numpy forward/backward passes.

Every linear and convolutional layer is weight-normalized: the effective
weight is norm * direction / ||direction|| row-wise, so the norms are
learned separately from the directions.  The last two layers (both
dueling branches) are noisy layers with factorized Gaussian noise,

    y = (W + W_noisy . eps_w) x + b + b_noisy . eps_b,
    eps_w = f(eps_out) f(eps_in)^T,  f(u) = sign(u) sqrt(|u|),

and the dueling head combines the branches as
Q(s, a) = V(s) + A(s, a) - mean_a A(s, a).

Parameters live in a flat {name: array} dict so the optimizer and the
checkpoint format treat them uniformly.  Computation follows the dtype
of the parameters (float32 for training, float64 in gradient tests).
"""

from dataclasses import dataclass

import numpy as np

NOISY_LAYERS = ("adv1", "adv2", "val1", "val2")


@dataclass(frozen=True)
class NetworkSpec:
    """Architecture description.

    dense: input_dim -> hidden -> (adv_hidden -> n_actions | val_hidden -> 1)
    conv:  (input_channels, input_length) -> conv stack -> hidden[-1] -> branches
    """

    variant: str = "dense"
    input_dim: int = 5
    n_actions: int = 21
    hidden: tuple = (512, 256)
    adv_hidden: int = 256
    val_hidden: int = 128
    conv_layers: tuple = ((32, 13, 5), (64, 11, 4), (64, 9, 4))  # (filters, kernel, stride)
    input_channels: int = 2
    # (force, signal) records at simulation-step resolution over the
    # trailing 6/omega_c window of the cooling problem
    input_length: int = 4320

    def conv_output_length(self) -> int:
        length = self.input_length
        for _, kernel, stride in self.conv_layers:
            length = (length - kernel) // stride + 1
            if length <= 0:
                raise ValueError("input_length too short for the conv stack")
        return length

    @property
    def trunk_widths(self) -> tuple:
        return self.hidden[-1:] if self.variant == "conv" else self.hidden


def _f_noise(u: np.ndarray) -> np.ndarray:
    return np.sign(u) * np.sqrt(np.abs(u))


def sample_noise(spec: NetworkSpec, params: dict, rng: np.random.Generator) -> dict:
    """Factorized noise draws (already f-transformed) per noisy layer."""
    noise = {}
    for name in NOISY_LAYERS:
        out_dim, in_dim = params[f"{name}/v"].shape
        dtype = params[f"{name}/v"].dtype
        noise[name] = (
            _f_noise(rng.standard_normal(in_dim)).astype(dtype),
            _f_noise(rng.standard_normal(out_dim)).astype(dtype),
        )
    return noise


def zero_noise(spec: NetworkSpec, params: dict) -> dict:
    noise = {}
    for name in NOISY_LAYERS:
        out_dim, in_dim = params[f"{name}/v"].shape
        dtype = params[f"{name}/v"].dtype
        noise[name] = (
            np.zeros(in_dim, dtype=dtype),
            np.zeros(out_dim, dtype=dtype),
        )
    return noise


class QNetwork:
    """Q-network with parameters in a flat dict and explicit backprop."""

    NOISY_SIGMA0 = 0.5

    def __init__(self, spec: NetworkSpec, params: dict = None):
        self.spec = spec
        self.params = params

    # -- initialization --------------------------------------------------

    def init_params(
        self, rng: np.random.Generator, dtype=np.float32, noisy_sigma0=None
    ) -> dict:
        spec = self.spec
        sigma0 = self.NOISY_SIGMA0 if noisy_sigma0 is None else noisy_sigma0
        params = {}

        def linear(name, in_dim, out_dim, noisy=False):
            v = rng.standard_normal((out_dim, in_dim)) / np.sqrt(in_dim)
            params[f"{name}/v"] = v.astype(dtype)
            params[f"{name}/g"] = np.linalg.norm(v, axis=1).astype(dtype)
            params[f"{name}/b"] = np.zeros(out_dim, dtype=dtype)
            if noisy:
                sigma = sigma0 / np.sqrt(in_dim)
                params[f"{name}/w_noisy"] = np.full(
                    (out_dim, in_dim), sigma, dtype=dtype
                )
                params[f"{name}/b_noisy"] = np.full(out_dim, sigma, dtype=dtype)

        if spec.variant == "conv":
            in_ch = spec.input_channels
            for i, (filters, kernel, _) in enumerate(spec.conv_layers):
                linear(f"conv{i}", in_ch * kernel, filters)
                in_ch = filters
            prev = spec.conv_layers[-1][0] * spec.conv_output_length()
        else:
            prev = spec.input_dim
        for i, width in enumerate(spec.trunk_widths):
            linear(f"fc{i}", prev, width)
            prev = width
        linear("adv1", prev, spec.adv_hidden, noisy=True)
        linear("adv2", spec.adv_hidden, spec.n_actions, noisy=True)
        linear("val1", prev, spec.val_hidden, noisy=True)
        linear("val2", spec.val_hidden, 1, noisy=True)
        self.params = params
        return params

    # -- layer primitives --------------------------------------------------

    def _linear_forward(self, name, x, noise, cache):
        # y = x W^T with W = diag(g/||v||) v + W_noisy . outer(eps_out,
        # eps_in); both products are applied without materializing W:
        # x W^T = (x v^T) * (g/||v||) and the factorized noise term is
        # eps_out * ((x * eps_in) W_noisy^T)
        params = self.params
        v = params[f"{name}/v"]
        g = params[f"{name}/g"]
        norms = np.linalg.norm(v, axis=1)
        scale = g / norms
        y = (x @ v.T) * scale + params[f"{name}/b"]
        if noise is not None:
            eps_in, eps_out = noise
            y = y + ((x * eps_in) @ params[f"{name}/w_noisy"].T) * eps_out
            y = y + params[f"{name}/b_noisy"] * eps_out
        cache[name] = (x, norms, scale, noise)
        return y

    def _linear_backward(self, name, gout, cache, grads):
        params = self.params
        x, norms, scale, noise = cache[name]
        v = params[f"{name}/v"]
        dw = gout.T @ x  # dL/dW of the weight-normalized part
        db = gout.sum(axis=0)
        grads[f"{name}/b"] = db
        gx = (gout * scale) @ v
        if noise is not None:
            eps_in, eps_out = noise
            grads[f"{name}/w_noisy"] = (gout * eps_out).T @ (x * eps_in)
            grads[f"{name}/b_noisy"] = db * eps_out
            gx = gx + ((gout * eps_out) @ params[f"{name}/w_noisy"]) * eps_in
        vhat = v / norms[:, None]
        dot = np.sum(dw * vhat, axis=1, keepdims=True)
        grads[f"{name}/g"] = dot[:, 0]
        grads[f"{name}/v"] = scale[:, None] * (dw - dot * vhat)
        return gx

    def _conv_forward(self, name, x, kernel, stride, cache):
        """x: (batch, channels, length) -> (batch, filters, out_len)."""
        batch, channels, length = x.shape
        out_len = (length - kernel) // stride + 1
        cols = np.empty((batch, out_len, channels * kernel), dtype=x.dtype)
        for j in range(out_len):
            cols[:, j, :] = x[:, :, j * stride : j * stride + kernel].reshape(
                batch, channels * kernel
            )
        params = self.params
        v = params[f"{name}/v"]
        g = params[f"{name}/g"]
        norms = np.linalg.norm(v, axis=1, keepdims=True)
        w = (g[:, None] / norms) * v
        y = cols @ w.T + params[f"{name}/b"]
        cache[name] = (x.shape, cols, w, norms, kernel, stride)
        return np.transpose(y, (0, 2, 1))

    def _conv_backward(self, name, gout, cache, grads):
        params = self.params
        x_shape, cols, w, norms, kernel, stride = cache[name]
        v = params[f"{name}/v"]
        g = params[f"{name}/g"]
        gy = np.transpose(gout, (0, 2, 1))  # (batch, out_len, filters)
        dw_total = np.einsum("blf,blc->fc", gy, cols)
        grads[f"{name}/b"] = gy.sum(axis=(0, 1))
        vhat = v / norms
        dot = np.sum(dw_total * vhat, axis=1, keepdims=True)
        grads[f"{name}/g"] = dot[:, 0]
        grads[f"{name}/v"] = (g[:, None] / norms) * (dw_total - dot * vhat)
        gcols = gy @ w
        gx = np.zeros(x_shape, dtype=gout.dtype)
        batch, channels, _ = x_shape
        for j in range(gcols.shape[1]):
            gx[:, :, j * stride : j * stride + kernel] += gcols[:, j, :].reshape(
                batch, channels, kernel
            )
        return gx

    # -- full passes ---------------------------------------------------------

    def forward_cached(self, x, noise=None):
        """(Q values (batch, n_actions), cache for backward)."""
        spec = self.spec
        x = np.asarray(x)
        cache = {}
        if noise is None:
            noise = zero_noise(spec, self.params)
        h = x
        if spec.variant == "conv":
            for i, (_, kernel, stride) in enumerate(spec.conv_layers):
                h = self._conv_forward(f"conv{i}", h, kernel, stride, cache)
                cache[f"conv{i}/relu"] = h > 0
                h = np.maximum(h, 0)
            h = h.reshape(h.shape[0], -1)
        for i in range(len(spec.trunk_widths)):
            h = self._linear_forward(f"fc{i}", h, None, cache)
            cache[f"fc{i}/relu"] = h > 0
            h = np.maximum(h, 0)
        a = self._linear_forward("adv1", h, noise["adv1"], cache)
        cache["adv1/relu"] = a > 0
        a = np.maximum(a, 0)
        a = self._linear_forward("adv2", a, noise["adv2"], cache)
        v = self._linear_forward("val1", h, noise["val1"], cache)
        cache["val1/relu"] = v > 0
        v = np.maximum(v, 0)
        v = self._linear_forward("val2", v, noise["val2"], cache)
        q = v + a - a.mean(axis=1, keepdims=True)
        return q, cache

    def forward(self, x, noise=None):
        """Q values for a single observation or a batch."""
        x = np.asarray(x)
        spec = self.spec
        single = (spec.variant == "dense" and x.ndim == 1) or (
            spec.variant == "conv" and x.ndim == 2
        )
        q, _ = self.forward_cached(x[None] if single else x, noise)
        return q[0] if single else q

    def backward(self, dq, cache):
        """Parameter gradients for scalar loss with dL/dQ = dq."""
        spec = self.spec
        grads = {}
        da = dq - dq.mean(axis=1, keepdims=True)
        dv = dq.sum(axis=1, keepdims=True)
        da = self._linear_backward("adv2", da, cache, grads)
        da = da * cache["adv1/relu"]
        dh = self._linear_backward("adv1", da, cache, grads)
        dv = self._linear_backward("val2", dv, cache, grads)
        dv = dv * cache["val1/relu"]
        dh = dh + self._linear_backward("val1", dv, cache, grads)
        for i in range(len(spec.trunk_widths) - 1, -1, -1):
            dh = dh * cache[f"fc{i}/relu"]
            dh = self._linear_backward(f"fc{i}", dh, cache, grads)
        if spec.variant == "conv":
            last = len(spec.conv_layers) - 1
            filters = spec.conv_layers[last][0]
            dh = dh.reshape(-1, filters, spec.conv_output_length())
            for i in range(last, -1, -1):
                dh = dh * cache[f"conv{i}/relu"]
                dh = self._conv_backward(f"conv{i}", dh, cache, grads)
        return grads

    def copy_params(self) -> dict:
        return {k: v.copy() for k, v in self.params.items()}
