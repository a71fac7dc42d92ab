from __future__ import annotations

import numpy as np

from .base import Classifier, check_training_data, cross_entropy, one_hot, softmax


class SoftmaxRegression(Classifier):
    """Multinomial logistic regression trained by full-batch gradient descent.

    Objective: mean cross-entropy + l2/2 * ||W||^2 (bias unpenalized), starting
    from zero weights. A step that would raise the objective is retried at half
    the learning rate, and the reduced rate is kept for later epochs.
    """

    kind = "logreg"

    def __init__(self, l2: float = 1e-3, lr: float = 0.1, epochs: int = 500, seed: int = 0):
        if l2 < 0 or lr <= 0 or epochs < 1:
            raise ValueError("logreg needs l2 >= 0, lr > 0, epochs >= 1")
        self.l2 = float(l2)
        self.lr = float(lr)
        self.epochs = int(epochs)
        self.seed = int(seed)
        self.loss_history: list[float] = []

    def hyperparameters(self):
        return {"l2": self.l2, "lr": self.lr, "epochs": self.epochs}

    # flat parameter vector = [W.ravel(), b]
    def _unpack(self, theta: np.ndarray, d: int, k: int) -> tuple[np.ndarray, np.ndarray]:
        return theta[: d * k].reshape(d, k), theta[d * k :]

    def loss_and_grad(self, theta, X, y_idx, n_classes):
        d = X.shape[1]
        W, b = self._unpack(theta, d, n_classes)
        P = softmax(X @ W + b)
        loss = cross_entropy(P, y_idx) + 0.5 * self.l2 * float(np.sum(W * W))
        R = (P - one_hot(y_idx, n_classes)) / len(X)
        gW = X.T @ R + self.l2 * W
        gb = R.sum(axis=0)
        return loss, np.concatenate([gW.ravel(), gb])

    def fit(self, X, y):
        X, classes, y_idx = check_training_data(X, y)
        d, k = X.shape[1], len(classes)
        theta = np.zeros(d * k + k)
        loss, grad = self.loss_and_grad(theta, X, y_idx, k)
        history = [loss]
        lr = self.lr
        for _ in range(self.epochs):
            for _attempt in range(60):
                candidate = theta - lr * grad
                c_loss, c_grad = self.loss_and_grad(candidate, X, y_idx, k)
                if c_loss <= loss:
                    break
                lr *= 0.5
            else:
                break
            theta, loss, grad = candidate, c_loss, c_grad
            history.append(loss)
        self.classes_ = classes
        self.n_features_ = d
        self.W, self.b = self._unpack(theta, d, k)
        self.loss_history = history
        return self

    def _predict_proba(self, X):
        return softmax(X @ self.W + self.b)

    def parameters(self):
        return {"W": self.W, "b": self.b}

    def set_parameters(self, params):
        self.W = np.asarray(params["W"], dtype=float)
        self.b = np.asarray(params["b"], dtype=float)

    def initial_parameters(self, X, n_classes, rng) -> np.ndarray:
        """Random point used by the gradient check (training itself starts at zero)."""
        return 0.1 * rng.standard_normal(X.shape[1] * n_classes + n_classes)
