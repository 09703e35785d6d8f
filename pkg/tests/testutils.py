"""Shared test helpers: finite-difference gradient oracle."""

import numpy as np

from petformer.tensor import Tape, backward


def fd_gradient(loss_fn, tensor, step=1e-5):
    """Central finite differences of a scalar function w.r.t. one tensor.

    loss_fn takes no arguments and must read tensor.data; returns a float.
    The tensor's data is restored before returning.
    """
    base = tensor.data.copy()
    flat = base.reshape(-1)
    grad = np.zeros_like(flat)
    for i in range(flat.size):
        orig = flat[i]
        flat[i] = orig + step
        tensor.data = flat.reshape(base.shape)
        up = loss_fn()
        flat[i] = orig - step
        tensor.data = flat.reshape(base.shape)
        down = loss_fn()
        flat[i] = orig
        grad[i] = (up - down) / (2.0 * step)
    tensor.data = base
    return grad.reshape(base.shape)


def analytic_gradients(loss_builder, tensors):
    """Run one taped forward/backward; returns [grad array per tensor]."""
    for t in tensors:
        t.grad = None
    with Tape():
        loss = loss_builder()
        backward(loss)
    return [t.grad if t.grad is not None else np.zeros_like(t.data) for t in tensors]


def assert_gradients_match(loss_builder, tensors, step=1e-5, rtol=1e-4, atol=1e-8):
    """Analytic gradients must match central finite differences elementwise.

    |analytic - fd| <= rtol * max(|analytic|, |fd|) + atol per element.
    """
    analytic = analytic_gradients(loss_builder, tensors)

    def scalar_loss():
        return loss_builder().item()

    for t, a in zip(tensors, analytic):
        fd = fd_gradient(scalar_loss, t, step=step)
        tol = rtol * np.maximum(np.abs(a), np.abs(fd)) + atol
        bad = np.abs(a - fd) > tol
        assert not bad.any(), (
            f"gradient mismatch for shape {t.shape}: analytic={a[bad][:5]}, fd={fd[bad][:5]}"
        )
