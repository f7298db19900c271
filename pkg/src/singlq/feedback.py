"""Affine state-feedback laws ``u(z, t) = gain @ z + feedforward(t)``."""

import numpy as np

from .problem_model import ExpSignal

__all__ = ["AffineFeedback"]


class AffineFeedback:
    """Affine feedback with an exponential-sum feedforward term.

    Instances are callables ``law(z, t)``; the simulator also uses
    :attr:`gain` directly to form closed-loop matrices.
    """

    __slots__ = ("gain", "feedforward")

    def __init__(self, gain, feedforward=None):
        gain = np.atleast_2d(np.asarray(gain, dtype=float)).copy()
        if feedforward is None:
            feedforward = ExpSignal.zero(gain.shape[0])
        if feedforward.dim != gain.shape[0]:
            raise ValueError("feedforward dimension must match the number of gain rows")
        gain.setflags(write=False)
        self.gain = gain
        self.feedforward = feedforward

    @property
    def m(self):
        return self.gain.shape[0]

    def __call__(self, z, t):
        return self.gain @ np.asarray(z, dtype=float) + self.feedforward(t)

    def closed_loop(self, A, B):
        return A + B @ self.gain

    def stack(self, other):
        """Concatenate outputs of two laws acting on the same state."""
        return AffineFeedback(np.vstack([self.gain, other.gain]),
                              ExpSignal.concat(self.feedforward, other.feedforward))

    def __repr__(self):
        return f"AffineFeedback(shape={self.gain.shape}, modes={len(self.feedforward.rates)})"
