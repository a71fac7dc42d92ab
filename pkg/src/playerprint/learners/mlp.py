from __future__ import annotations

import numpy as np

from .base import Classifier, check_training_data, cross_entropy, one_hot, softmax


class MLP(Classifier):
    """One-hidden-layer tanh network with softmax output, trained by
    mini-batch SGD with momentum on cross-entropy."""

    kind = "mlp"

    def __init__(
        self,
        hidden: int = 64,
        lr: float = 0.01,
        momentum: float = 0.9,
        epochs: int = 300,
        batch_size: int = 32,
        l2: float = 0.0,
        seed: int = 0,
    ):
        if hidden < 1 or lr <= 0 or not 0 <= momentum < 1 or epochs < 1 or batch_size < 1 or l2 < 0:
            raise ValueError("invalid MLP hyperparameters")
        self.hidden = int(hidden)
        self.lr = float(lr)
        self.momentum = float(momentum)
        self.epochs = int(epochs)
        self.batch_size = int(batch_size)
        self.l2 = float(l2)
        self.seed = int(seed)
        self.loss_history: list[float] = []

    def hyperparameters(self):
        return {
            "hidden": self.hidden,
            "lr": self.lr,
            "momentum": self.momentum,
            "epochs": self.epochs,
            "batch_size": self.batch_size,
            "l2": self.l2,
        }

    def _shapes(self, d: int, k: int):
        h = self.hidden
        return [("W1", (d, h)), ("b1", (h,)), ("W2", (h, k)), ("b2", (k,))]

    def _unpack(self, theta, d, k):
        out, pos = {}, 0
        for name, shape in self._shapes(d, k):
            size = int(np.prod(shape))
            out[name] = theta[pos : pos + size].reshape(shape)
            pos += size
        return out

    def initial_parameters(self, X, n_classes, rng) -> np.ndarray:
        d, h, k = X.shape[1], self.hidden, n_classes
        a1 = np.sqrt(6.0 / (d + h))
        a2 = np.sqrt(6.0 / (h + k))
        return np.concatenate(
            [
                rng.uniform(-a1, a1, d * h),
                np.zeros(h),
                rng.uniform(-a2, a2, h * k),
                np.zeros(k),
            ]
        )

    def loss_and_grad(self, theta, X, y_idx, n_classes):
        p = self._unpack(theta, X.shape[1], n_classes)
        H = np.tanh(X @ p["W1"] + p["b1"])
        P = softmax(H @ p["W2"] + p["b2"])
        loss = cross_entropy(P, y_idx)
        if self.l2:
            loss += 0.5 * self.l2 * float(np.sum(p["W1"] ** 2) + np.sum(p["W2"] ** 2))
        R = (P - one_hot(y_idx, n_classes)) / len(X)
        gW2 = H.T @ R
        gb2 = R.sum(axis=0)
        dH = (R @ p["W2"].T) * (1.0 - H * H)
        gW1 = X.T @ dH
        gb1 = dH.sum(axis=0)
        if self.l2:
            gW1 = gW1 + self.l2 * p["W1"]
            gW2 = gW2 + self.l2 * p["W2"]
        return loss, np.concatenate([gW1.ravel(), gb1, gW2.ravel(), gb2])

    def fit(self, X, y):
        X, classes, y_idx = check_training_data(X, y)
        k = len(classes)
        rng = np.random.default_rng(self.seed)
        theta = self.initial_parameters(X, k, rng)
        velocity = np.zeros_like(theta)
        n = len(X)
        checkpoint = max(1, self.epochs // 10)
        history = [self.loss_and_grad(theta, X, y_idx, k)[0]]
        for epoch in range(1, self.epochs + 1):
            order = rng.permutation(n)
            for start in range(0, n, self.batch_size):
                batch = order[start : start + self.batch_size]
                _, grad = self.loss_and_grad(theta, X[batch], y_idx[batch], k)
                velocity = self.momentum * velocity - self.lr * grad
                theta = theta + velocity
            if epoch % checkpoint == 0 or epoch == self.epochs:
                history.append(self.loss_and_grad(theta, X, y_idx, k)[0])
        self.classes_ = classes
        self.n_features_ = X.shape[1]
        self._set_flat(theta, X.shape[1], k)
        self.loss_history = history
        return self

    def _set_flat(self, theta, d, k):
        p = self._unpack(theta, d, k)
        self.W1, self.b1, self.W2, self.b2 = p["W1"], p["b1"], p["W2"], p["b2"]

    def _predict_proba(self, X):
        H = np.tanh(X @ self.W1 + self.b1)
        return softmax(H @ self.W2 + self.b2)

    def parameters(self):
        return {"W1": self.W1, "b1": self.b1, "W2": self.W2, "b2": self.b2}

    def set_parameters(self, params):
        self.W1 = np.asarray(params["W1"], dtype=float)
        self.b1 = np.asarray(params["b1"], dtype=float)
        self.W2 = np.asarray(params["W2"], dtype=float)
        self.b2 = np.asarray(params["b2"], dtype=float)
        self.hidden = self.W1.shape[1]
