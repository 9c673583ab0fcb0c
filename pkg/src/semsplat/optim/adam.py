"""Adam with named parameter groups and support for row growth/pruning,
matching how densification edits the Gaussian arrays mid-run."""
from __future__ import annotations

import numpy as np


class GroupAdam:
    def __init__(self, learning_rates, beta1=0.9, beta2=0.999, eps=1e-8):
        self.lr = dict(learning_rates)
        self.beta1 = beta1
        self.beta2 = beta2
        self.eps = eps
        self.m = {}
        self.v = {}
        self.steps = {}

    def register(self, name, array):
        self.m[name] = np.zeros_like(array)
        self.v[name] = np.zeros_like(array)
        self.steps[name] = 0

    def step(self, name, array, grad):
        """Update `array` in place; returns it."""
        if name not in self.m:
            self.register(name, array)
        self.steps[name] += 1
        t = self.steps[name]
        self.m[name] = self.beta1 * self.m[name] + (1 - self.beta1) * grad
        self.v[name] = self.beta2 * self.v[name] + (1 - self.beta2) * grad * grad
        m_hat = self.m[name] / (1 - self.beta1**t)
        v_hat = self.v[name] / (1 - self.beta2**t)
        array -= self.lr[name] * m_hat / (np.sqrt(v_hat) + self.eps)
        return array

    def select_rows(self, name, index):
        if name in self.m:
            self.m[name] = self.m[name][index]
            self.v[name] = self.v[name][index]

    def append_rows(self, name, count):
        if name in self.m and count > 0:
            pad = np.zeros((count,) + self.m[name].shape[1:])
            self.m[name] = np.concatenate([self.m[name], pad])
            self.v[name] = np.concatenate([self.v[name], pad])
