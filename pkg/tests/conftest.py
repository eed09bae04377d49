import json

import numpy as np
import pytest

from pfdca import CondDist, DiscreteDist, JointXY

# Three-symbol evaluation source: the first two public symbols identify the
# private symbol almost surely, the third is ambiguous between y0 and y2.
DEMO_CHANNEL = np.array(
    [
        [0.90, 0.08, 0.40],
        [0.025, 0.82, 0.05],
        [0.075, 0.10, 0.55],
    ]
)
DEMO_PX = np.array([1.0, 1.0, 1.0]) / 3.0


@pytest.fixture
def demo_joint() -> JointXY:
    return JointXY(DiscreteDist(DEMO_PX.copy()), CondDist(DEMO_CHANNEL.copy()))


@pytest.fixture
def tiny_joint() -> JointXY:
    channel = np.array([[0.8, 0.3], [0.2, 0.7]])
    return JointXY(DiscreteDist(np.array([0.4, 0.6])), CondDist(channel))


# Two-symbol instance carrying a nontrivial interior fixed point of the
# idealized update map at beta = 0.6 (found by root search, verified in
# tests to 1e-13).
FIXED_POINT_CHANNEL = np.array([[0.87, 0.08], [0.13, 0.92]])
FIXED_POINT_PX = np.array([0.40, 0.60])
FIXED_POINT_BETA = 0.6


@pytest.fixture
def fixed_point_joint() -> JointXY:
    return JointXY(DiscreteDist(FIXED_POINT_PX.copy()), CondDist(FIXED_POINT_CHANNEL.copy()))


@pytest.fixture
def demo_dist_file(tmp_path, demo_joint):
    path = tmp_path / "demo.json"
    path.write_text(
        json.dumps(
            {
                "p_x": demo_joint.p_x.probs.tolist(),
                "p_y_given_x": demo_joint.y_given_x.matrix.tolist(),
            }
        )
    )
    return path


# --- independent oracles -------------------------------------------------
# Plain-loop implementations used to freeze expected values; they share no
# code with the package internals they check.


def entropy_oracle(probs) -> float:
    total = 0.0
    for p in probs:
        if p > 0:
            total -= p * np.log(p)
    return total


def marginal_y_oracle(j: JointXY):
    q = j.y_given_x.matrix
    px = j.p_x.probs
    return [sum(q[y, x] * px[x] for x in range(len(px))) for y in range(q.shape[0])]


def mi_bruteforce_oracle(joint_matrix) -> float:
    """I(A;B) by the double sum over a joint pmf array."""
    pa = joint_matrix.sum(axis=1)
    pb = joint_matrix.sum(axis=0)
    total = 0.0
    for a in range(joint_matrix.shape[0]):
        for b in range(joint_matrix.shape[1]):
            pab = joint_matrix[a, b]
            if pab > 0:
                total += pab * np.log(pab / (pa[a] * pb[b]))
    return total


def encoder_joint_zx_oracle(enc_matrix, px):
    return enc_matrix * np.asarray(px)[None, :]


def encoder_joint_zy_oracle(enc_matrix, j: JointXY):
    """Joint pmf of (Z, Y) under the Markov chain Y - X - Z."""
    px = j.p_x.probs
    q = j.y_given_x.matrix
    nz = enc_matrix.shape[0]
    ny = q.shape[0]
    out = np.zeros((nz, ny))
    for z in range(nz):
        for y in range(ny):
            out[z, y] = sum(enc_matrix[z, x] * q[y, x] * px[x] for x in range(len(px)))
    return out


def lagrangian_oracle(enc_matrix, j: JointXY, beta: float) -> float:
    izx = mi_bruteforce_oracle(encoder_joint_zx_oracle(enc_matrix, j.p_x.probs).T)
    izy = mi_bruteforce_oracle(encoder_joint_zy_oracle(enc_matrix, j).T)
    return izy - beta * izx


def idealized_update_oracle(enc, j: JointXY, beta: float):
    """One step of the idealized update: exact linear solve of the
    backward equation, softmax normalization, exact Markov inversion.
    Valid on square invertible instances only."""
    px = j.p_x.probs
    q = j.y_given_x.matrix
    p_y = np.array(marginal_y_oracle(j))
    pxcy = (q * px[None, :]).T / p_y[None, :]
    pz = enc @ px
    c = (1.0 - beta) * np.log(pz)[:, None] + beta * np.log(enc)
    logits = np.linalg.solve(q.T, c.T).T
    logits -= logits.max(axis=0, keepdims=True)
    target = np.exp(logits)
    target /= target.sum(axis=0, keepdims=True)
    return np.linalg.solve(pxcy.T, target.T).T, target


def stationary_encoder_oracle(j: JointXY, beta: float, enc0, tol=1e-13):
    """Interior fixed point of the idealized update on a 2x2 instance,
    located by damped Newton on the fixed-point residual (interior
    nontrivial fixed points are typically saddles of the plain
    iteration, so direct iteration cannot find them).

    Returns the (2, 2) encoder or None if the search fails.
    """

    def residual(u):
        enc = np.array([u, 1.0 - u])
        if enc.min() <= 1e-9:
            return None
        return idealized_update_oracle(enc, j, beta)[0][0] - u

    u = np.array(enc0, dtype=float)[0]
    for _ in range(300):
        g0 = residual(u)
        if g0 is None:
            return None
        if np.max(np.abs(g0)) < tol:
            return np.array([u, 1.0 - u])
        jac = np.empty((2, 2))
        h = 1e-7
        for k in range(2):
            up = u.copy()
            up[k] += h
            gk = residual(up)
            if gk is None:
                return None
            jac[:, k] = (gk - g0) / h
        try:
            step = np.linalg.solve(jac, -g0)
        except np.linalg.LinAlgError:
            return None
        t = 1.0
        while t > 1e-9:
            trial = u + t * step
            if np.all(trial > 1e-6) and np.all(trial < 1 - 1e-6):
                gt = residual(trial)
                if gt is not None and np.max(np.abs(gt)) < np.max(np.abs(g0)):
                    u = trial
                    break
            t *= 0.5
        else:
            return None
    return None
