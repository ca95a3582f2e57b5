"""Reduced-problem solvers for internal tree nodes.

Two weighted binary classifiers over pseudo-labeled samples: an exact search
over axis-aligned splits, and an L1-regularized logistic regression fitted by
cyclic proximal coordinate descent.  A pseudo-label of +1 means "should go
right".  The descent loop is JIT-compiled; the first call in a process pays
the compilation cost.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np
from numba import njit


@dataclass(frozen=True)
class WeightedSamples:
    """Weighted binary samples in struct-of-arrays form.

    ``x`` is (n, d); ``label`` is (n,) with values in {-1, +1}; ``weight`` is
    (n,) strictly positive (zero-weight instances are dropped upstream).
    """

    x: np.ndarray
    label: np.ndarray
    weight: np.ndarray

    def __post_init__(self):
        x = np.ascontiguousarray(self.x, dtype=np.float64)
        label = np.ascontiguousarray(self.label, dtype=np.int64).reshape(-1)
        weight = np.ascontiguousarray(self.weight, dtype=np.float64).reshape(-1)
        if x.ndim != 2 or x.shape[0] != label.shape[0] or x.shape[0] != weight.shape[0]:
            raise ValueError("x, label, and weight must agree on the number of samples")
        if not np.isfinite(x).all():
            raise ValueError("features contain non-finite values")
        if label.size and not np.isin(label, (-1, 1)).all():
            raise ValueError("pseudo-labels must be -1 or +1")
        if label.size and weight.min() <= 0.0:
            raise ValueError("weights must be strictly positive")
        object.__setattr__(self, "x", x)
        object.__setattr__(self, "label", label)
        object.__setattr__(self, "weight", weight)

    def __len__(self) -> int:
        return self.x.shape[0]

    @property
    def d(self) -> int:
        return self.x.shape[1]


@dataclass(frozen=True)
class HyperplaneSolution:
    """Hyperplane scoring ``w . x + bias``; positive score means "right"."""

    weights: np.ndarray
    bias: float
    surrogate_loss: float  # weighted logistic loss, penalty excluded
    nonzeros: int


def best_axis_split(samples: WeightedSamples) -> tuple[int, float, float]:
    """Exact minimizer of the weighted routing error over axis splits.

    Considers, for every feature, the midpoints between consecutive distinct
    values plus -inf (route everything right) and +inf (route everything
    left).  Routing sends a sample right iff ``x[feature] >= threshold``; a
    sample is in error when its side disagrees with its pseudo-label.  Ties
    break toward the lowest feature index, then the lowest threshold.
    """
    n = len(samples)
    if n == 0:
        raise ValueError("best_axis_split needs at least one sample")
    base = float(samples.weight[samples.label == -1].sum())  # all-right error
    signed = np.where(samples.label == 1, samples.weight, -samples.weight)

    best = (0, -np.inf, base)
    for j in range(samples.d):
        xj = samples.x[:, j]
        order = np.argsort(xj, kind="stable")
        xs = xj[order]
        cum = np.cumsum(signed[order])
        # moving the threshold above xs[i] sends samples 0..i to the left
        cut = np.flatnonzero(xs[:-1] != xs[1:])
        errors = np.concatenate(([base], base + cum[cut], [base + cum[-1]]))
        thresholds = np.concatenate(([-np.inf], (xs[cut] + xs[cut + 1]) / 2.0, [np.inf]))
        i = int(np.argmin(errors))
        if errors[i] < best[2]:
            best = (j, float(thresholds[i]), float(errors[i]))
    return best


def logistic_objective(samples: WeightedSamples, weights: np.ndarray, bias: float, lam: float) -> float:
    """Weighted logistic loss plus lam * ||weights||_1 (bias unpenalized)."""
    z = samples.label * (samples.x @ weights + bias)
    loss = float(samples.weight @ np.logaddexp(0.0, -z))
    return loss + lam * float(np.abs(weights).sum())


@njit(cache=True)
def _wlogloss(z, weight):
    total = 0.0
    for i in range(z.shape[0]):
        zi = z[i]
        if zi > 0.0:
            total += weight[i] * math.log1p(math.exp(-zi))
        else:
            total += weight[i] * (-zi + math.log1p(math.exp(zi)))
    return total


@njit(cache=True)
def _cd_solve(XT, label, weight, w, bias, lam, tol, max_sweeps, stall_rtol):
    """Proximal Newton sweeps; returns the per-sweep objectives.

    Each sweep freezes the loss curvature, runs a few cyclic soft-threshold
    coordinate-descent passes (bias included, unpenalized) on the quadratic
    model, and line-searches the resulting direction on the true objective,
    so the objective never increases.  ``XT`` is the (d, n) transposed sample
    matrix for contiguous per-coordinate access.
    """
    d, n = XT.shape
    z = np.empty(n)
    for i in range(n):
        acc = bias
        for j in range(d):
            acc += XT[j, i] * w[j]
        z[i] = label[i] * acc
    loss = _wlogloss(z, weight)
    l1 = 0.0
    for j in range(d):
        l1 += abs(w[j])

    a = np.empty(n)       # d(loss)/d(score), negated below as needed
    q = np.empty(n)       # curvature weights
    grad = np.empty(d + 1)
    curv = np.empty(d + 1)
    step = np.empty(d + 1)  # direction in (w, bias) space
    u = np.empty(n)         # score change X.step under the current direction
    z_try = np.empty(n)

    history = np.empty(max_sweeps)
    sweeps = 0
    while sweeps < max_sweeps:
        obj_before = loss + lam * l1
        # quadratic model of the loss at the current point
        qsum = 0.0
        gb = 0.0
        for i in range(n):
            zi = z[i]
            if zi > 0.0:
                s = 1.0 / (1.0 + math.exp(zi))
            else:
                e = math.exp(zi)
                s = 1.0 - e / (1.0 + e)
            a[i] = weight[i] * s * label[i]
            q[i] = max(weight[i] * s * (1.0 - s), 1e-12)
            qsum += q[i]
            gb -= a[i]
            u[i] = 0.0
        for j in range(d):
            g = 0.0
            h = 1e-12
            for i in range(n):
                xij = XT[j, i]
                g -= a[i] * xij
                h += q[i] * xij * xij
            grad[j] = g
            curv[j] = h
            step[j] = 0.0
        grad[d] = gb
        curv[d] = max(qsum, 1e-12)
        step[d] = 0.0

        for _ in range(3):  # cyclic passes on the frozen quadratic model
            inner_max = 0.0
            for j in range(d + 1):
                mg = grad[j]
                if j < d:
                    for i in range(n):
                        mg += q[i] * XT[j, i] * u[i]
                    v = w[j] + step[j]
                    t = v - mg / curv[j]
                    if lam > 0.0:
                        if t > lam / curv[j]:
                            t -= lam / curv[j]
                        elif t < -lam / curv[j]:
                            t += lam / curv[j]
                        else:
                            t = 0.0
                    delta = t - v
                else:
                    for i in range(n):
                        mg += q[i] * u[i]
                    delta = -mg / curv[j]
                if delta != 0.0:
                    step[j] += delta
                    if j < d:
                        for i in range(n):
                            u[i] += XT[j, i] * delta
                    else:
                        for i in range(n):
                            u[i] += delta
                    if abs(delta) > inner_max:
                        inner_max = abs(delta)
            if inner_max < 0.1 * tol:
                break

        # halving line search on the true penalized objective
        scale = 1.0
        accepted = False
        slack = 1e-12 * (1.0 + abs(obj_before))
        for _ in range(25):
            loss_new = 0.0
            for i in range(n):
                zi = z[i] + label[i] * u[i] * scale
                z_try[i] = zi
                if zi > 0.0:
                    loss_new += weight[i] * math.log1p(math.exp(-zi))
                else:
                    loss_new += weight[i] * (-zi + math.log1p(math.exp(zi)))
            l1_new = 0.0
            for j in range(d):
                l1_new += abs(w[j] + step[j] * scale)
            if loss_new + lam * l1_new <= obj_before + slack:
                accepted = True
                break
            scale *= 0.5
        if not accepted:
            break
        max_delta = 0.0
        for j in range(d):
            w[j] += step[j] * scale
            if abs(step[j] * scale) > max_delta:
                max_delta = abs(step[j] * scale)
        bias += step[d] * scale
        if abs(step[d] * scale) > max_delta:
            max_delta = abs(step[d] * scale)
        for i in range(n):
            z[i] = z_try[i]
        loss = loss_new
        l1 = l1_new

        obj_after = loss + lam * l1
        history[sweeps] = obj_after
        sweeps += 1
        if max_delta < tol:
            break
        if obj_before - obj_after <= stall_rtol * (1.0 + abs(obj_before)):
            break
    return bias, loss, sweeps, history[:sweeps]


def l1_logistic(
    samples: WeightedSamples,
    lam: float,
    warm_start: HyperplaneSolution | None = None,
    tol: float = 1e-6,
    max_sweeps: int = 1000,
    stall_rtol: float = 1e-12,
) -> HyperplaneSolution:
    """Minimize sum_n weight_n * log(1 + exp(-label_n (w.x_n + b))) + lam*||w||_1.

    Cyclic proximal coordinate descent with an unpenalized bias: every sweep
    makes soft-threshold coordinate updates against the current quadratic
    approximation of the loss, then line-searches the swept direction on the
    true objective.  Stops when the largest committed coordinate change in a
    sweep is below ``tol``, when the objective stalls (relative decrease
    below ``stall_rtol``, which bounds the bias walk on separable data), or
    after ``max_sweeps`` sweeps.  Deterministic given inputs and warm start;
    the line search makes every sweep decrease or preserve the objective,
    which is verified on the returned history.
    """
    n, d = len(samples), samples.d
    if n == 0:
        raise ValueError("l1_logistic needs at least one sample")
    if lam < 0.0:
        raise ValueError("lam must be >= 0")
    if warm_start is not None:
        w = np.asarray(warm_start.weights, dtype=np.float64).copy()
        b = float(warm_start.bias)
        if w.shape != (d,):
            raise ValueError("warm start dimension mismatch")
    else:
        w = np.zeros(d)
        b = 0.0
    xt = np.ascontiguousarray(samples.x.T)
    bias, loss, sweeps, history = _cd_solve(
        xt, samples.label.astype(np.float64), samples.weight, w, b, lam, tol, max_sweeps, stall_rtol
    )
    if history.size > 1:
        rises = np.diff(history) > 1e-9 * (1.0 + np.abs(history[:-1]))
        assert not rises.any(), "objective increased across a sweep"
    return HyperplaneSolution(w, float(bias), float(loss), int(np.count_nonzero(w)))
