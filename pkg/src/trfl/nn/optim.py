"""First-order optimizers operating in place on ``(params, grads)`` dicts."""
import math

import numpy as np


class Optimizer:
    """Holds the optimizer state for a list of ``(name, param, grad)`` triples.

    ``lr`` may be changed between steps (schedules do this); ``step_count``
    increases by one per :meth:`step`.
    """

    def __init__(self, parameters, lr, weight_decay=0.0):
        self.parameters = list(parameters)
        self.lr = float(lr)
        self.weight_decay = float(weight_decay)
        self.step_count = 0
        self.state = {}

    def step(self):
        self.step_count += 1
        for name, p, g in self.parameters:
            self._update(name, p, g)

    def _update(self, name, p, g):
        raise NotImplementedError


class SGD(Optimizer):
    """SGD with heavy-ball momentum and decoupled weight decay.

    ``v <- momentum * v + g``; ``p <- p - lr * wd * p - lr * v``.
    """

    def __init__(self, parameters, lr=0.01, momentum=0.0, weight_decay=0.0):
        super().__init__(parameters, lr, weight_decay)
        self.momentum = float(momentum)

    def _update(self, name, p, g):
        if self.weight_decay:
            p -= (self.lr * self.weight_decay) * p
        if self.momentum:
            v = self.state.get(name)
            if v is None:
                v = self.state[name] = np.zeros_like(p)
            v *= self.momentum
            v += g
            p -= self.lr * v
        else:
            p -= self.lr * g


class Adam(Optimizer):
    """Adam with bias correction; weight decay is decoupled (AdamW style)."""

    def __init__(self, parameters, lr=1e-3, betas=(0.9, 0.999), eps=1e-8, weight_decay=0.0):
        super().__init__(parameters, lr, weight_decay)
        self.beta1, self.beta2 = betas
        self.eps = eps

    def _update(self, name, p, g):
        m, v = self.state.get(name, (None, None))
        if m is None:
            m = np.zeros_like(p)
            v = np.zeros_like(p)
            self.state[name] = (m, v)
        m *= self.beta1
        m += (1 - self.beta1) * g
        v *= self.beta2
        v += (1 - self.beta2) * g * g
        t = self.step_count
        mhat = m / (1 - self.beta1 ** t)
        vhat = v / (1 - self.beta2 ** t)
        if self.weight_decay:
            p -= (self.lr * self.weight_decay) * p
        p -= self.lr * mhat / (np.sqrt(vhat) + self.eps)


def cosine_lr(base_lr, step, total_steps, min_lr=0.0):
    """Cosine decay from ``base_lr`` at step 0 to ``min_lr`` at ``total_steps``."""
    if total_steps <= 0:
        return base_lr
    frac = min(step, total_steps) / total_steps
    return min_lr + 0.5 * (base_lr - min_lr) * (1 + math.cos(math.pi * frac))


def make_optimizer(kind, parameters, lr, momentum=0.9, weight_decay=0.0):
    if kind == "sgd":
        return SGD(parameters, lr=lr, momentum=momentum, weight_decay=weight_decay)
    if kind == "adam":
        return Adam(parameters, lr=lr, weight_decay=weight_decay)
    raise ValueError(f"unknown optimizer {kind!r} (expected 'sgd' or 'adam')")
