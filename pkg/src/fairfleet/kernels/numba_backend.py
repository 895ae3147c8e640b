"""Jit-compiled implementations of the numeric hot paths.

Same signatures and same float64 semantics as the numpy backend; bodies are
written loop-style so numba can fuse them. fastmath stays off so masked
probabilities underflow to exact zeros identically to the fallback.
"""

from __future__ import annotations

import numpy as np
from numba import njit

NAME = "numba"

_NEG_BIG = 1e9


@njit(cache=True)
def policy_forward(x, w1, b1, w2, b2, mask, n_heads):
    batch = x.shape[0]
    h = np.tanh(np.dot(x, w1) + b1)
    out = np.dot(h, w2) + b2
    n_act = (out.shape[1] - 1) // n_heads
    probs = np.zeros((batch, n_heads, n_act))
    values = np.empty(batch)
    for i in range(batch):
        values[i] = out[i, n_heads * n_act]
        for hd in range(n_heads):
            base = hd * n_act
            zmax = -np.inf
            for a in range(n_act):
                z = out[i, base + a] + (mask[i, base + a] - 1.0) * _NEG_BIG
                if z > zmax:
                    zmax = z
            total = 0.0
            for a in range(n_act):
                z = out[i, base + a] + (mask[i, base + a] - 1.0) * _NEG_BIG
                e = np.exp(z - zmax) * mask[i, base + a]
                probs[i, hd, a] = e
                total += e
            for a in range(n_act):
                probs[i, hd, a] /= total
    return probs, values


@njit(cache=True)
def ppo_loss_grads(x, w1, b1, w2, b2, mask, n_heads, actions, old_logp, adv, ret, clip, ent_coef):
    batch = x.shape[0]
    pre = np.dot(x, w1) + b1
    h = np.tanh(pre)
    out = np.dot(h, w2) + b2
    n_out = out.shape[1]
    n_act = (n_out - 1) // n_heads
    ha = n_heads * n_act

    probs = np.zeros((batch, n_heads, n_act))
    logp_all = np.empty((batch, n_heads, n_act))
    ent_head = np.zeros((batch, n_heads))
    logp_taken = np.zeros(batch)
    values = np.empty(batch)
    for i in range(batch):
        values[i] = out[i, ha]
        for hd in range(n_heads):
            base = hd * n_act
            zmax = -np.inf
            for a in range(n_act):
                z = out[i, base + a] + (mask[i, base + a] - 1.0) * _NEG_BIG
                if z > zmax:
                    zmax = z
            total = 0.0
            for a in range(n_act):
                z = out[i, base + a] + (mask[i, base + a] - 1.0) * _NEG_BIG
                e = np.exp(z - zmax) * mask[i, base + a]
                probs[i, hd, a] = e
                logp_all[i, hd, a] = z - zmax
                total += e
            logt = np.log(total)
            for a in range(n_act):
                probs[i, hd, a] /= total
                logp_all[i, hd, a] -= logt
                if probs[i, hd, a] > 0.0:
                    ent_head[i, hd] -= probs[i, hd, a] * logp_all[i, hd, a]
            logp_taken[i] += logp_all[i, hd, actions[i, hd]]

    policy_loss = 0.0
    value_loss = 0.0
    entropy = 0.0
    clip_frac = 0.0
    dout_pi = np.zeros((batch, n_out))
    dout_v = np.zeros((batch, n_out))
    for i in range(batch):
        ratio = np.exp(logp_taken[i] - old_logp[i])
        unclipped = ratio * adv[i]
        cr = ratio
        if cr < 1.0 - clip:
            cr = 1.0 - clip
        elif cr > 1.0 + clip:
            cr = 1.0 + clip
        clipped = cr * adv[i]
        surr = unclipped if unclipped < clipped else clipped
        policy_loss -= surr
        if abs(ratio - 1.0) > clip:
            clip_frac += 1.0

        dlogp = -unclipped if unclipped <= clipped else 0.0
        dlogp /= batch
        ent_i = 0.0
        for hd in range(n_heads):
            ent_i += ent_head[i, hd]
            base = hd * n_act
            for a in range(n_act):
                p = probs[i, hd, a]
                one = 1.0 if a == actions[i, hd] else 0.0
                g = dlogp * (one - p)
                if p > 0.0:
                    g -= (ent_coef / batch) * (-p * (logp_all[i, hd, a] + ent_head[i, hd]))
                dout_pi[i, base + a] = g
        entropy += ent_i
        verr = values[i] - ret[i]
        value_loss += 0.5 * verr * verr
        dout_v[i, ha] = verr / batch
    policy_loss /= batch
    value_loss /= batch
    entropy /= batch
    clip_frac /= batch

    w2t = np.ascontiguousarray(w2.T)
    ht = np.ascontiguousarray(h.T)
    xt = np.ascontiguousarray(x.T)

    gw2_pi = np.dot(ht, dout_pi)
    gb2_pi = np.zeros(n_out)
    for i in range(batch):
        for j in range(n_out):
            gb2_pi[j] += dout_pi[i, j]
    dpre = np.dot(dout_pi, w2t) * (1.0 - h * h)
    gw1_pi = np.dot(xt, dpre)
    gb1_pi = np.zeros(pre.shape[1])
    for i in range(batch):
        for j in range(pre.shape[1]):
            gb1_pi[j] += dpre[i, j]

    gw2_v = np.dot(ht, dout_v)
    gb2_v = np.zeros(n_out)
    for i in range(batch):
        for j in range(n_out):
            gb2_v[j] += dout_v[i, j]
    dpre_v = np.dot(dout_v, w2t) * (1.0 - h * h)
    gw1_v = np.dot(xt, dpre_v)
    gb1_v = np.zeros(pre.shape[1])
    for i in range(batch):
        for j in range(pre.shape[1]):
            gb1_v[j] += dpre_v[i, j]

    return (
        gw1_pi, gb1_pi, gw2_pi, gb2_pi,
        gw1_v, gb1_v, gw2_v, gb2_v,
        policy_loss, value_loss, entropy, clip_frac,
    )


@njit(cache=True)
def gae(rewards, values, dones, gamma, lam):
    n = rewards.shape[0]
    adv = np.empty(n)
    carry = 0.0
    for t in range(n - 1, -1, -1):
        if dones[t]:
            nonterm = 0.0
            next_value = 0.0
        else:
            nonterm = 1.0
            next_value = values[t + 1] if t + 1 < n else 0.0
        delta = rewards[t] + gamma * next_value * nonterm - values[t]
        carry = delta + gamma * lam * nonterm * carry
        adv[t] = carry
    return adv, adv + values


@njit(cache=True)
def adam_step(params, grads, m, v, t, lr, beta1, beta2, eps):
    c1 = 1.0 - beta1**t
    c2 = 1.0 - beta2**t
    for i in range(params.shape[0]):
        m[i] = beta1 * m[i] + (1.0 - beta1) * grads[i]
        v[i] = beta2 * v[i] + (1.0 - beta2) * grads[i] * grads[i]
        params[i] -= lr * (m[i] / c1) / (np.sqrt(v[i] / c2) + eps)
