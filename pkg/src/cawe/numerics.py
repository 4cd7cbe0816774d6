"""Dense numerics kernel: stable softmax, same-length 1-D convolution,
RMSProp, Xavier init and a deterministic 64-bit RNG.

Everything here is a pure function of its inputs (the SplitMix64 class
mutates only its own state) and runs in double precision.
"""

from dataclasses import dataclass

import numpy as np

from . import backend

_MASK64 = (1 << 64) - 1
_GOLDEN = 0x9E3779B97F4A7C15
_TWO53 = float(1 << 53)


def softmax(v):
    """Stable softmax of a 1-D vector; output sums to 1.

    Shift-invariant via max subtraction. Raises ValueError on empty or
    non-finite input.
    """
    v = np.asarray(v, dtype=np.float64)
    if v.ndim != 1 or v.size == 0:
        raise ValueError("softmax expects a non-empty 1-D vector")
    if not np.all(np.isfinite(v)):
        raise ValueError("softmax input must be finite")
    e = np.exp(v - v.max())
    return e / e.sum()


def conv1d_same(signal, kernel):
    """Same-length 1-D convolution with zero padding.

    out[t] = sum_j kernel[j] * signal[t + j - (W-1)/2]. Kernel length W
    must be odd and satisfy W <= 2T - 1.
    """
    signal = np.asarray(signal, dtype=np.float64)
    kernel = np.asarray(kernel, dtype=np.float64)
    if signal.ndim != 1 or kernel.ndim != 1:
        raise ValueError("conv1d_same expects 1-D arrays")
    W = kernel.shape[0]
    if W % 2 == 0:
        raise ValueError(f"kernel length must be odd, got {W}")
    if W > 2 * signal.shape[0] - 1:
        raise ValueError("kernel longer than 2T-1")
    return backend.conv1d_same(np.ascontiguousarray(signal),
                               np.ascontiguousarray(kernel))


def rng_next(state):
    """One splitmix64 step: (state) -> (new_state, uniform in [0, 1)).

    Pure integer recurrence, platform-independent:
      state += 0x9E3779B97F4A7C15                       (mod 2^64)
      z = state
      z = (z ^ (z >> 30)) * 0xBF58476D1CE4E5B9          (mod 2^64)
      z = (z ^ (z >> 27)) * 0x94D049BB133111EB          (mod 2^64)
      z ^= z >> 31
    The uniform is the top 53 bits of z: (z >> 11) / 2^53.
    """
    state = (state + _GOLDEN) & _MASK64
    z = state
    z = ((z ^ (z >> 30)) * 0xBF58476D1CE4E5B9) & _MASK64
    z = ((z ^ (z >> 27)) * 0x94D049BB133111EB) & _MASK64
    z ^= z >> 31
    return state, (z >> 11) / _TWO53


class SplitMix64:
    """Deterministic RNG over the splitmix64 recurrence of rng_next."""

    def __init__(self, seed):
        self.state = int(seed) & _MASK64

    def next_u64(self):
        self.state = (self.state + _GOLDEN) & _MASK64
        z = self.state
        z = ((z ^ (z >> 30)) * 0xBF58476D1CE4E5B9) & _MASK64
        z = ((z ^ (z >> 27)) * 0x94D049BB133111EB) & _MASK64
        return z ^ (z >> 31)

    def uniform(self):
        """Uniform float in [0, 1) from the top 53 bits."""
        return (self.next_u64() >> 11) / _TWO53

    def normal(self):
        """One standard normal via Box-Muller (consumes two uniforms)."""
        u1 = self.uniform()
        while u1 == 0.0:
            u1 = self.uniform()
        u2 = self.uniform()
        return np.sqrt(-2.0 * np.log(u1)) * np.cos(2.0 * np.pi * u2)

    def normal_array(self, shape, scale=1.0):
        out = np.empty(shape, dtype=np.float64)
        flat = out.reshape(-1)
        for k in range(flat.size):
            flat[k] = self.normal() * scale
        return out

    def uniform_array(self, shape, low=0.0, high=1.0):
        out = np.empty(shape, dtype=np.float64)
        flat = out.reshape(-1)
        for k in range(flat.size):
            flat[k] = low + (high - low) * self.uniform()
        return out

    def randint_below(self, n):
        """Uniform int in [0, n) via the multiply-shift trick (no libm)."""
        if n <= 0:
            raise ValueError("n must be positive")
        return (self.next_u64() * n) >> 64

    def shuffle(self, seq):
        """In-place Fisher-Yates shuffle of a mutable sequence."""
        for i in range(len(seq) - 1, 0, -1):
            j = self.randint_below(i + 1)
            seq[i], seq[j] = seq[j], seq[i]

    def derive(self, tag):
        """Independent child stream keyed by an integer tag."""
        return SplitMix64((self.state ^ ((tag + 1) * _GOLDEN)) & _MASK64)


def xavier_uniform(rng, shape):
    """Xavier/Glorot uniform init, bounds +-sqrt(6/(fan_in+fan_out)).

    For a (rows, cols) weight, fan_in=cols and fan_out=rows; a 1-D shape
    (n,) is treated as (n, 1). Values drawn row-major from rng.
    """
    if len(shape) == 1:
        fan_out, fan_in = shape[0], 1
    else:
        fan_out, fan_in = shape[0], int(np.prod(shape[1:]))
    bound = np.sqrt(6.0 / (fan_in + fan_out))
    return rng.uniform_array(shape, -bound, bound)


@dataclass
class RmsPropState:
    """Per-parameter mean-square accumulator for RMSProp."""

    mean_square: np.ndarray
    decay: float = 0.9
    epsilon: float = 1e-8

    @classmethod
    def zeros_like(cls, param, decay=0.9, epsilon=1e-8):
        return cls(np.zeros_like(param, dtype=np.float64), decay, epsilon)


def rmsprop_step(param, grad, state, lr):
    """One RMSProp update; pure, returns (new_param, new_state).

    ms <- decay*ms + (1-decay)*grad^2 ; param <- param - lr*grad/(sqrt(ms)+eps)
    """
    if param.shape != grad.shape or param.shape != state.mean_square.shape:
        raise ValueError("param/grad/state shape mismatch")
    ms = state.decay * state.mean_square + (1.0 - state.decay) * grad * grad
    new_param = param - lr * grad / (np.sqrt(ms) + state.epsilon)
    return new_param, RmsPropState(ms, state.decay, state.epsilon)
