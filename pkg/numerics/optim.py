"""
First-order optimizer for tape gradients.
"""

from typing import Dict, Optional

import numpy as np

from models.errors import RejectedStateError


class Adam:
    """Adam over a dict of named parameter arrays, updated in place."""

    def __init__(self, params: Dict[str, np.ndarray], lr: float, betas=(0.9, 0.999), eps: float = 1e-8):
        for key, arr in params.items():
            if not arr.flags.writeable:
                raise RejectedStateError(f"Parameter '{key}' belongs to a frozen net")
        self.params = params
        self.lr = lr
        self.beta1, self.beta2 = betas
        self.eps = eps
        self.t = 0
        self.m = {k: np.zeros_like(v) for k, v in params.items()}
        self.v = {k: np.zeros_like(v) for k, v in params.items()}

    def step(self, grads: Dict[str, np.ndarray], lr: Optional[float] = None,
             max_grad_norm: Optional[float] = None) -> float:
        """Apply one update; returns the (pre-clipping) global gradient norm."""
        lr = self.lr if lr is None else lr
        norm = float(np.sqrt(sum(float(np.sum(g * g)) for k, g in grads.items() if k in self.params)))
        scale = 1.0
        if max_grad_norm is not None and norm > max_grad_norm:
            scale = max_grad_norm / (norm + 1e-12)
        self.t += 1
        c1 = 1.0 - self.beta1 ** self.t
        c2 = 1.0 - self.beta2 ** self.t
        for key, g in grads.items():
            if key not in self.params:
                continue
            g = g * scale
            self.m[key] = self.beta1 * self.m[key] + (1.0 - self.beta1) * g
            self.v[key] = self.beta2 * self.v[key] + (1.0 - self.beta2) * g * g
            if lr == 0.0:
                continue
            update = lr * (self.m[key] / c1) / (np.sqrt(self.v[key] / c2) + self.eps)
            self.params[key] -= update
        return norm
