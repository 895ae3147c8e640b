"""Vectorized numpy implementations of the numeric hot paths.

This is the fallback backend; the jit backend mirrors these signatures.
Masked probabilities are exact zeros: the additive -1e9 shift underflows
exp() to 0.0 in float64 and the explicit multiply by the mask pins it.
"""

from __future__ import annotations

import numpy as np

NAME = "numpy"

_NEG_BIG = 1e9


def policy_forward(
    x: np.ndarray,
    w1: np.ndarray,
    b1: np.ndarray,
    w2: np.ndarray,
    b2: np.ndarray,
    mask: np.ndarray,
    n_heads: int,
) -> tuple[np.ndarray, np.ndarray]:
    """Forward pass: per-head masked action probabilities and state values.

    x: (B, In), mask: (B, n_heads * A) of 0.0/1.0.
    Returns probs (B, n_heads, A) and values (B,).
    """
    h = np.tanh(x @ w1 + b1)
    out = h @ w2 + b2
    batch = x.shape[0]
    n_act = (out.shape[1] - 1) // n_heads
    logits = out[:, : n_heads * n_act].reshape(batch, n_heads, n_act)
    m3 = mask.reshape(batch, n_heads, n_act)
    z = logits + (m3 - 1.0) * _NEG_BIG
    z = z - z.max(axis=2, keepdims=True)
    ez = np.exp(z) * m3
    probs = ez / ez.sum(axis=2, keepdims=True)
    return probs, out[:, n_heads * n_act]


def ppo_loss_grads(
    x: np.ndarray,
    w1: np.ndarray,
    b1: np.ndarray,
    w2: np.ndarray,
    b2: np.ndarray,
    mask: np.ndarray,
    n_heads: int,
    actions: np.ndarray,
    old_logp: np.ndarray,
    adv: np.ndarray,
    ret: np.ndarray,
    clip: float,
    ent_coef: float,
):
    """Clipped-surrogate loss with entropy bonus plus analytic gradients.

    Returns (gw1_pi, gb1_pi, gw2_pi, gb2_pi, gw1_v, gb1_v, gw2_v, gb2_v,
    policy_loss, value_loss, entropy, clip_frac). The _pi gradients cover
    the surrogate and entropy terms, the _v gradients the 0.5 * MSE value
    term; their sum is the gradient of
    policy_loss + 0.5 * MSE - ent_coef * entropy.
    """
    batch = x.shape[0]
    pre = x @ w1 + b1
    h = np.tanh(pre)
    out = h @ w2 + b2
    n_act = (out.shape[1] - 1) // n_heads
    ha = n_heads * n_act
    logits = out[:, :ha].reshape(batch, n_heads, n_act)
    values = out[:, ha]

    m3 = mask.reshape(batch, n_heads, n_act)
    z = logits + (m3 - 1.0) * _NEG_BIG
    zmax = z.max(axis=2, keepdims=True)
    zs = z - zmax
    ez = np.exp(zs) * m3
    sez = ez.sum(axis=2, keepdims=True)
    probs = ez / sez
    logp_all = zs - np.log(sez)

    bi = np.arange(batch)[:, None]
    hi = np.arange(n_heads)[None, :]
    logp_taken = logp_all[bi, hi, actions].sum(axis=1)

    ratio = np.exp(logp_taken - old_logp)
    unclipped = ratio * adv
    clipped = np.clip(ratio, 1.0 - clip, 1.0 + clip) * adv
    surr = np.minimum(unclipped, clipped)
    policy_loss = -surr.mean()

    plogp = np.where(probs > 0.0, probs * logp_all, 0.0)
    ent_head = -plogp.sum(axis=2)
    entropy = float(ent_head.sum(axis=1).mean())
    value_err = values - ret
    value_loss = 0.5 * float((value_err * value_err).mean())
    clip_frac = float(np.mean(np.abs(ratio - 1.0) > clip))

    # d surrogate / d logp_taken; the clipped branch is flat in ratio.
    active = unclipped <= clipped
    dsurr = np.where(active, unclipped, 0.0)
    dlogp_taken = -dsurr / batch

    onehot = np.zeros_like(probs)
    onehot[bi, hi, actions] = 1.0
    dz_pi = dlogp_taken[:, None, None] * (onehot - probs)

    dent_dz = np.where(probs > 0.0, -probs * (logp_all + ent_head[:, :, None]), 0.0)
    dz_pi = dz_pi - (ent_coef / batch) * dent_dz

    dout_pi = np.zeros_like(out)
    dout_pi[:, :ha] = dz_pi.reshape(batch, ha)
    dout_v = np.zeros_like(out)
    dout_v[:, ha] = value_err / batch

    one_m_h2 = 1.0 - h * h

    def _backprop(dout: np.ndarray):
        gw2 = h.T @ dout
        gb2 = dout.sum(axis=0)
        dpre = (dout @ w2.T) * one_m_h2
        gw1 = x.T @ dpre
        gb1 = dpre.sum(axis=0)
        return gw1, gb1, gw2, gb2

    gw1_pi, gb1_pi, gw2_pi, gb2_pi = _backprop(dout_pi)
    gw1_v, gb1_v, gw2_v, gb2_v = _backprop(dout_v)
    return (
        gw1_pi, gb1_pi, gw2_pi, gb2_pi,
        gw1_v, gb1_v, gw2_v, gb2_v,
        float(policy_loss), value_loss, entropy, clip_frac,
    )


def gae(
    rewards: np.ndarray,
    values: np.ndarray,
    dones: np.ndarray,
    gamma: float,
    lam: float,
) -> tuple[np.ndarray, np.ndarray]:
    """Generalized advantage estimation over concatenated segments.

    dones[t] = True closes a segment; the recursion restarts after it, so
    several trajectories can be processed in one call.
    """
    n = rewards.shape[0]
    adv = np.empty(n, dtype=np.float64)
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


def adam_step(
    params: np.ndarray,
    grads: np.ndarray,
    m: np.ndarray,
    v: np.ndarray,
    t: int,
    lr: float,
    beta1: float,
    beta2: float,
    eps: float,
) -> None:
    """One in-place Adam update on a flat parameter vector."""
    m[:] = beta1 * m + (1.0 - beta1) * grads
    v[:] = beta2 * v + (1.0 - beta2) * grads * grads
    mhat = m / (1.0 - beta1**t)
    vhat = v / (1.0 - beta2**t)
    params[:] = params - lr * mhat / (np.sqrt(vhat) + eps)
