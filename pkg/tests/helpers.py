"""Shared test oracles: central finite differences and gradient checks.

The finite-difference path never touches the autodiff machinery beyond
re-running the forward, so it stays an independent check of backward().
"""

import numpy as np

from glintru.tensor import Tensor


def rel_err(approx, exact):
    denom = max(np.abs(exact).max(), 1e-10) if np.asarray(exact).size else 1.0
    return np.abs(np.asarray(approx) - np.asarray(exact)).max() / denom


def fd_grad(f, x, h=1e-5):
    """Central finite-difference gradient of scalar f at array x."""
    x = np.asarray(x, dtype=np.float64)
    g = np.zeros_like(x)
    flat = x.reshape(-1)
    gflat = g.reshape(-1)
    for i in range(flat.size):
        orig = flat[i]
        flat[i] = orig + h
        fp = f(x)
        flat[i] = orig - h
        fm = f(x)
        flat[i] = orig
        gflat[i] = (fp - fm) / (2.0 * h)
    return g


def check_grads(build, tensors, rtol=1e-4, h=1e-5):
    """Compare backward() grads of scalar build(tensors) against FD.

    build: dict[str, Tensor] -> scalar Tensor.  Every named tensor is
    checked; returns the worst relative error seen.
    """
    for t in tensors.values():
        t.zero_grad()
    out = build(tensors)
    out.backward()
    # snapshot now: build() may rebind .data on live tensors, and the FD
    # loop must always perturb around the original values
    originals = {k: v.data.copy() for k, v in tensors.items()}
    grads = {k: (v.grad.copy() if v.grad is not None else np.zeros_like(v.data))
             for k, v in tensors.items()}
    worst = 0.0
    for name in tensors:
        def f(arr, _name=name):
            fresh = {k: Tensor(v.copy()) for k, v in originals.items()}
            fresh[_name] = Tensor(arr.copy())
            return float(build(fresh).data)

        numeric = fd_grad(f, originals[name].copy(), h=h)
        analytic = grads[name]
        err = rel_err(analytic, numeric)
        assert err <= rtol, f"gradient mismatch for {name}: rel err {err:.3e}"
        worst = max(worst, err)
    return worst
