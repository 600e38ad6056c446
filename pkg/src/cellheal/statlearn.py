"""Logistic-curve regression between a scalar tuning parameter and a KPI.

A fitted model is y(x) = y_lo + (y_hi - y_lo) * logistic(beta0 + beta1*x):
bounded, monotone, and able to express the saturation KPI curves show at
both ends of a parameter range. Fitting is deterministic nonlinear least
squares (Gauss-Newton with Levenberg damping, multi-start).
"""

from dataclasses import dataclass

import numpy as np

from .errors import DegenerateX, TooFewSamples

FLAT_Y_RANGE = 1e-9


def logistic(z):
    """1 / (1 + exp(-z)), overflow-safe for large |z|. Scalar or array."""
    z = np.asarray(z, dtype=float)
    out = np.empty_like(z)
    pos = z >= 0
    out[pos] = 1.0 / (1.0 + np.exp(-z[pos]))
    ez = np.exp(z[~pos])
    out[~pos] = ez / (1.0 + ez)
    return float(out) if out.ndim == 0 else out


@dataclass(frozen=True)
class KpiModel:
    beta0: float
    beta1: float
    y_lo: float
    y_hi: float
    n_samples: int
    residual_rms: float

    def __post_init__(self):
        if not self.y_lo < self.y_hi:
            raise ValueError("y_lo must be strictly below y_hi")


def predict(model, x):
    """Predicted KPI in natural units; bounded inside [y_lo, y_hi]."""
    span = model.y_hi - model.y_lo
    return model.y_lo + span * logistic(model.beta0 + model.beta1 * np.asarray(x, dtype=float))


def _lm(res_jac, theta0, max_iter=200, gtol=1e-10):
    # Gauss-Newton with Levenberg damping; only improving steps accepted,
    # so the returned loss never exceeds the loss at theta0. Stops on small
    # gradient, stalled loss, or the iteration cap.
    theta = np.asarray(theta0, dtype=float)
    r, jac = res_jac(theta)
    loss = float(r @ r)
    lam = 1e-3
    eye = np.eye(len(theta))
    for _ in range(max_iter):
        grad = 2.0 * (jac.T @ r)
        if np.linalg.norm(grad) < gtol:
            break
        hess = jac.T @ jac
        stepped = False
        for _ in range(50):
            try:
                delta = np.linalg.solve(hess + lam * eye, -(jac.T @ r))
            except np.linalg.LinAlgError:
                lam *= 10.0
                continue
            cand = theta + delta
            r2, jac2 = res_jac(cand)
            loss2 = float(r2 @ r2)
            if loss2 < loss:
                gain = loss - loss2
                theta, r, jac, loss = cand, r2, jac2, loss2
                lam = max(lam * 0.3, 1e-12)
                stepped = True
                if gain <= 1e-13 * max(loss, 1e-300):
                    return theta, loss
                break
            lam *= 10.0
        if not stepped:
            break
    return theta, loss


def _normalized_res_jac(x, yn):
    def res_jac(theta):
        b0, b1 = theta
        s = logistic(b0 + b1 * x)
        r = yn - s
        ds = s * (1.0 - s)
        jac = np.empty((len(x), 2))
        jac[:, 0] = -ds
        jac[:, 1] = -ds * x
        return r, jac

    return res_jac


def _natural_res_jac(x, y):
    def res_jac(theta):
        b0, b1, lo, hi = theta
        s = logistic(b0 + b1 * x)
        r = y - (lo + (hi - lo) * s)
        ds = (hi - lo) * s * (1.0 - s)
        jac = np.empty((len(x), 4))
        jac[:, 0] = -ds
        jac[:, 1] = -ds * x
        jac[:, 2] = -(1.0 - s)
        jac[:, 3] = -s
        return r, jac

    return res_jac


def _logit_ols_init(x, yn):
    # OLS on logit of the clamped normalized response; init only.
    yc = np.clip(yn, 0.02, 0.98)
    t = np.log(yc / (1.0 - yc))
    a = np.column_stack([np.ones_like(x), x])
    coef, *_ = np.linalg.lstsq(a, t, rcond=None)
    return coef


def _coarse_scan_init(x, yn):
    b0 = np.linspace(-50.0, 50.0, 41)
    b1 = np.linspace(-100.0, 100.0, 81)
    eta = b0[:, None, None] + b1[None, :, None] * x[None, None, :]
    loss = ((yn[None, None, :] - logistic(eta)) ** 2).sum(axis=2)
    i, j = np.unravel_index(np.argmin(loss), loss.shape)
    return np.array([b0[i], b1[j]])


def _flat_model(y):
    mean = float(np.mean(y))
    rms = float(np.sqrt(np.mean((y - mean) ** 2)))
    return KpiModel(0.0, 0.0, mean - 1e-6, mean + 1e-6, len(y), rms)


def fit(x, y):
    """Fit a KpiModel to samples (x_i, y_i), y in natural KPI units.

    Deterministic: identical samples give bit-identical coefficients.
    Raises TooFewSamples (< 3 points) or DegenerateX (all x equal).
    """
    x = np.asarray(x, dtype=float)
    y = np.asarray(y, dtype=float)
    if x.shape != y.shape or x.ndim != 1:
        raise TooFewSamples("x and y must be equal-length 1-D arrays")
    if len(x) < 3:
        raise TooFewSamples(f"need at least 3 samples, got {len(x)}")
    if np.unique(x).size < 2:
        raise DegenerateX("all x values are equal")

    ymin, ymax = float(np.min(y)), float(np.max(y))
    if ymax - ymin < FLAT_Y_RANGE:
        return _flat_model(y)

    # stage 1: beta only, output bounds pinned to the data range + 10% margin
    yrange = ymax - ymin
    margin = max(0.1 * yrange, 1e-6)
    lo0, hi0 = ymin - margin, ymax + margin
    span0 = hi0 - lo0
    yn = (y - lo0) / span0
    res_jac_n = _normalized_res_jac(x, yn)
    starts = [
        _logit_ols_init(x, yn),
        _coarse_scan_init(x, yn),
    ]
    best = None
    for theta0 in starts:
        theta, loss = _lm(res_jac_n, theta0)
        if best is None or loss < best[1]:
            best = (theta, loss)
    (b0, b1), loss_n = best

    # stage 2: refine the output bounds too; data-range pinning cannot
    # represent a generic logistic curve exactly, this stage can. Started
    # from the stage-1 optimum the loss can only decrease.
    res_jac_4 = _natural_res_jac(x, y)
    best4 = None
    for theta0 in (
        np.array([b0, b1, lo0, hi0]),
        np.array([b0, b1, ymin - yrange, ymax + yrange]),
    ):
        theta, loss = _lm(res_jac_4, theta0)
        if best4 is None or loss < best4[1]:
            best4 = (theta, loss)
    (b0, b1, lo, hi), loss4 = best4
    if loss4 > loss_n * span0 ** 2:  # paranoia; LM cannot worsen its start
        b0, b1, lo, hi = best[0][0], best[0][1], lo0, hi0

    if hi < lo:  # same curve with flipped orientation
        lo, hi = hi, lo
        b0, b1 = -b0, -b1
    if hi - lo < FLAT_Y_RANGE:
        return _flat_model(y)

    model = KpiModel(float(b0), float(b1), float(lo), float(hi), len(x), 0.0)
    rms = float(np.sqrt(np.mean((y - predict(model, x)) ** 2)))
    return KpiModel(float(b0), float(b1), float(lo), float(hi), len(x), rms)
