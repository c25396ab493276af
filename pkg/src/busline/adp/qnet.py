"""Small perceptron that scores a (state, action) pair.

Two hidden layers, logistic units everywhere including the single
output, so the score lives in (0, 1) like the clipped cost targets it
is trained towards. Every unit computes phi(sum(w x) - b) with the
bias subtracted and a configurable slope inside the logistic.
"""

from __future__ import annotations

import numpy as np

__all__ = ["QNet", "CHECKPOINT_FORMAT"]

CHECKPOINT_FORMAT = "busline-qnet-1"


class QNet:
    """Fully connected d -> h1 -> h2 -> 1 scorer with exact gradients."""

    def __init__(
        self,
        n_inputs: int,
        hidden1: int = 5,
        hidden2: int = 3,
        slope: float = 0.5,
        init_half_range: float = 2.0,
        rng: np.random.Generator | None = None,
    ):
        if n_inputs < 1 or hidden1 < 1 or hidden2 < 1:
            raise ValueError("layer sizes must be positive")
        if slope <= 0.0:
            raise ValueError("slope must be positive")
        self.n_inputs = n_inputs
        self.hidden1 = hidden1
        self.hidden2 = hidden2
        self.slope = float(slope)
        if rng is None:
            self.w1 = np.zeros((hidden1, n_inputs))
            self.b1 = np.zeros(hidden1)
            self.w2 = np.zeros((hidden2, hidden1))
            self.b2 = np.zeros(hidden2)
            self.w3 = np.zeros(hidden2)
            self.b3 = 0.0
        else:
            r = init_half_range
            self.w1 = rng.uniform(-r, r, size=(hidden1, n_inputs))
            self.b1 = rng.uniform(-r, r, size=hidden1)
            self.w2 = rng.uniform(-r, r, size=(hidden2, hidden1))
            self.b2 = rng.uniform(-r, r, size=hidden2)
            self.w3 = rng.uniform(-r, r, size=hidden2)
            self.b3 = float(rng.uniform(-r, r))

    def _phi(self, v: np.ndarray | float):
        return 1.0 / (1.0 + np.exp(-self.slope * v))

    def forward(self, x: np.ndarray) -> float:
        h1 = self._phi(self.w1 @ x - self.b1)
        h2 = self._phi(self.w2 @ h1 - self.b2)
        return float(self._phi(self.w3 @ h2 - self.b3))

    def forward_cached(self, x: np.ndarray):
        """Output plus the layer activations backprop needs."""
        h1 = self._phi(self.w1 @ x - self.b1)
        h2 = self._phi(self.w2 @ h1 - self.b2)
        y = float(self._phi(self.w3 @ h2 - self.b3))
        return y, h1, h2

    def gradient(self, x: np.ndarray):
        """Exact gradient of the output w.r.t. every parameter.

        Returns (y, grads) with grads keyed like the attributes. Bias
        gradients carry the minus sign from the subtracted bias.
        """
        a = self.slope
        y, h1, h2 = self.forward_cached(x)
        d3 = a * y * (1.0 - y)  # dy/dv3
        g_w3 = d3 * h2
        g_b3 = -d3
        d2 = d3 * self.w3 * (a * h2 * (1.0 - h2))  # dy/dv2
        g_w2 = np.outer(d2, h1)
        g_b2 = -d2
        d1 = (self.w2.T @ d2) * (a * h1 * (1.0 - h1))  # dy/dv1
        g_w1 = np.outer(d1, x)
        g_b1 = -d1
        return y, {"w1": g_w1, "b1": g_b1, "w2": g_w2, "b2": g_b2, "w3": g_w3, "b3": g_b3}

    def sgd_step(self, x: np.ndarray, target: float, learn_rate: float) -> float:
        """One towards-target update; returns the signed error target - y."""
        y, g = self.gradient(x)
        delta = target - y
        step = learn_rate * delta
        self.w1 += step * g["w1"]
        self.b1 += step * g["b1"]
        self.w2 += step * g["w2"]
        self.b2 += step * g["b2"]
        self.w3 += step * g["w3"]
        self.b3 += step * g["b3"]
        return delta

    def max_abs_param(self) -> float:
        return max(
            float(np.abs(self.w1).max()),
            float(np.abs(self.b1).max()),
            float(np.abs(self.w2).max()),
            float(np.abs(self.b2).max()),
            float(np.abs(self.w3).max()),
            abs(self.b3),
        )

    def copy(self) -> "QNet":
        out = QNet(self.n_inputs, self.hidden1, self.hidden2, self.slope)
        out.w1 = self.w1.copy()
        out.b1 = self.b1.copy()
        out.w2 = self.w2.copy()
        out.b2 = self.b2.copy()
        out.w3 = self.w3.copy()
        out.b3 = self.b3
        return out

    # -- persistence --------------------------------------------------------

    def save(self, path, extra: dict | None = None) -> None:
        """Write an npz checkpoint; extra holds small metadata strings."""
        payload = {
            "format": np.array(CHECKPOINT_FORMAT),
            "slope": np.array(self.slope),
            "w1": self.w1,
            "b1": self.b1,
            "w2": self.w2,
            "b2": self.b2,
            "w3": self.w3,
            "b3": np.array(self.b3),
        }
        for k, v in (extra or {}).items():
            payload["meta_" + k] = np.array(v)
        np.savez(path, **payload)

    @classmethod
    def load(cls, path) -> tuple["QNet", dict]:
        with np.load(path, allow_pickle=False) as z:
            fmt = str(z["format"])
            if fmt != CHECKPOINT_FORMAT:
                raise ValueError(f"unsupported checkpoint format {fmt!r}")
            w1 = z["w1"]
            net = cls(
                n_inputs=w1.shape[1],
                hidden1=w1.shape[0],
                hidden2=z["w2"].shape[0],
                slope=float(z["slope"]),
            )
            net.w1 = w1.copy()
            net.b1 = z["b1"].copy()
            net.w2 = z["w2"].copy()
            net.b2 = z["b2"].copy()
            net.w3 = z["w3"].copy()
            net.b3 = float(z["b3"])
            extra = {
                k[len("meta_") :]: z[k][()] for k in z.files if k.startswith("meta_")
            }
        return net, extra
