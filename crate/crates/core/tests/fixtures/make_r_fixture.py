"""Regenerates r_reference.json.

A line-by-line NumPy transcription of the reference R function

    rdc <- function(x,y,k,s) {
      x  <- cbind(apply(as.matrix(x),2,function(u) ecdf(u)(u)),1)
      y  <- cbind(apply(as.matrix(y),2,function(u) ecdf(u)(u)),1)
      wx <- matrix(rnorm(ncol(x)*k,0,s),ncol(x),k)
      wy <- matrix(rnorm(ncol(y)*k,0,s),ncol(y),k)
      cancor(cbind(cos(x%*%wx),sin(x%*%wx)), cbind(cos(y%*%wy),sin(y%*%wy)))$cor
    }

with the weight matrices drawn here and stored, and `cancor` reproduced as R
computes it: centre both sides, QR-factor each, take the singular values of
Qx' Qy.
"""

import json
import pathlib

import numpy as np

N, K, S = 50, 5, 8.0
rng = np.random.default_rng(20130101)


def ecdf(u):
    return np.array([(u <= v).sum() / len(u) for v in u])


def q_factor(a):
    q, r = np.linalg.qr(a - a.mean(axis=0))
    d = np.abs(np.diag(r))
    # R's qr() would pivot out columns below this relative tolerance.
    assert d.min() > 1e-7 * d.max(), "rank deficient at R's tolerance"
    return q


def cancor(a, b):
    return np.linalg.svd(q_factor(a).T @ q_factor(b), compute_uv=False)


x = np.column_stack([rng.normal(size=N), rng.uniform(size=N)])
x[7, 1] = x[3, 1]  # a tie in the second column
y = np.sin(3 * x[:, 0]) + x[:, 1] ** 2 + 0.3 * rng.normal(size=N)
y = y.reshape(-1, 1)

ux = np.column_stack([np.apply_along_axis(ecdf, 0, x), np.ones(N)])
uy = np.column_stack([np.apply_along_axis(ecdf, 0, y), np.ones(N)])
wx = rng.normal(0, S, size=(ux.shape[1], K))
wy = rng.normal(0, S, size=(uy.shape[1], K))
fx = np.column_stack([np.cos(ux @ wx), np.sin(ux @ wx)])
fy = np.column_stack([np.cos(uy @ wy), np.sin(uy @ wy)])
cor = cancor(fx, fy)

out = {
    "n": N,
    "k": K,
    "x": x.tolist(),
    "y": y.tolist(),
    "wx": wx.tolist(),
    "wy": wy.tolist(),
    "copula_x": ux[:, :-1].tolist(),
    "copula_y": uy[:, :-1].tolist(),
    "features_x": fx.tolist(),
    "features_y": fy.tolist(),
    "cancor": cor.tolist(),
}
path = pathlib.Path(__file__).with_name("r_reference.json")
path.write_text(json.dumps(out, indent=1) + "\n")
