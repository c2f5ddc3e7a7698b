"""Small fully-connected networks built on the autodiff core."""

import numpy as np

from . import autodiff as ad
from .autodiff import DimensionError, parameter


class MLP:
    """Affine layers with relu between them (no activation after the last).

    Weights are He-initialized from the given generator, biases start at zero.
    forward() accepts a (batch, in_dim) tensor or a single 1-D vector and
    returns output of matching rank.
    """

    def __init__(self, in_dim, widths, *, rng):
        self.in_dim = int(in_dim)
        self.widths = tuple(int(w) for w in widths)
        if not self.widths:
            raise ValueError("MLP needs at least one layer width")
        self.weights = []
        self.biases = []
        fan_in = self.in_dim
        for fan_out in self.widths:
            scale = np.sqrt(2.0 / fan_in)
            self.weights.append(parameter(rng.standard_normal((fan_in, fan_out)) * scale))
            self.biases.append(parameter(np.zeros(fan_out)))
            fan_in = fan_out

    @property
    def out_dim(self):
        return self.widths[-1]

    def forward(self, x):
        x = ad.as_tensor(x)
        if x.ndim not in (1, 2) or x.shape[-1] != self.in_dim:
            raise DimensionError(f"expected input of dim {self.in_dim}, got shape {x.shape}")
        single = x.ndim == 1
        h = ad.reshape(x, (1, x.shape[0])) if single else x
        last = len(self.weights) - 1
        for i, (w, b) in enumerate(zip(self.weights, self.biases)):
            h = ad.add_rowvec(ad.matmul(h, w), b)
            if i != last:
                h = ad.relu(h)
        if single:
            h = ad.reshape(h, (h.shape[1],))
        return h

    def parameters(self):
        params = []
        for w, b in zip(self.weights, self.biases):
            params.append(w)
            params.append(b)
        return params
