"""Discrete closed-loop eigenvalue check for the simulated topology.

Builds the same one-sample-delayed loop the simulator executes (linear
reset stage) as one discrete state-space system and reports the largest
closed-loop eigenvalue magnitude.
"""
import numpy as np
import scipy.signal

from resetloop import bilinear_discretize
from resetloop.reset import base_linear

TS = 30e-6


def block_ss(df):
    """(A, B, C, D) of a DiscreteFilter including its output-delay chain."""
    a_full = np.concatenate([[1.0], np.array(df.a)])
    A, B, C, D = scipy.signal.tf2ss(np.array(df.b), a_full)
    n = A.shape[0]
    m = df.delay_samples
    if m:
        # append a shift register after the output
        Az = np.zeros((n + m, n + m))
        Az[:n, :n] = A
        Az[n, :n] = C[0]
        for i in range(1, m):
            Az[n + i, n + i - 1] = 1.0
        Bz = np.zeros((n + m, 1))
        Bz[:n, 0] = B[:, 0]
        Bz[n, 0] = D[0, 0]
        Cz = np.zeros((1, n + m))
        Cz[0, n + m - 1] = 1.0
        Dz = np.zeros((1, 1))
        return Az, Bz, Cz, Dz
    return A, B, C, np.atleast_2d(D)


def closed_loop_eigs(model, ts=TS):
    blocks = {
        "rbl": block_ss(bilinear_discretize(base_linear(model.reset), ts)),
        "cl": block_ss(bilinear_discretize(model.c_l, ts)),
        "ct": block_ss(bilinear_discretize(model.c_t, ts)),
        "cd": block_ss(bilinear_discretize(model.c_d, ts)),
        "g": block_ss(bilinear_discretize(model.plant, ts)),
    }
    if model.c_s is not None:
        blocks["cs"] = block_ss(bilinear_discretize(model.c_s, ts))  # trigger only
    order = ["rbl", "cl", "ct", "cd", "g"]
    sizes = {k: blocks[k][0].shape[0] for k in order}
    off = {}
    pos = 0
    for k in order:
        off[k] = pos
        pos += sizes[k]
    iyp = pos  # y_prev register
    n = pos + 1

    A = np.zeros((n, n))
    Brow = np.zeros(n)  # input r

    def crow(k):
        c = np.zeros(n)
        c[off[k] : off[k] + sizes[k]] = blocks[k][2][0]
        return c, blocks[k][3][0, 0]

    # e = r - yp
    e_x = np.zeros(n)
    e_x[iyp] = -1.0
    e_r = 1.0
    # ur = RBL(e)
    c, d = crow("rbl")
    ur_x = c + d * e_x
    ur_r = d * e_r
    # v = kc * CL(ur)
    c, d = crow("cl")
    v_x = model.k_c * (c + d * ur_x)
    v_r = model.k_c * d * ur_r
    # u = CT(v)
    c, d = crow("ct")
    u_x = c + d * v_x
    u_r = d * v_r
    # w = CD(yp)
    c, d = crow("cd")
    w_x = c.copy()
    w_x[iyp] += d
    # pin = u - w
    pin_x = u_x - w_x
    pin_r = u_r
    # y = G(pin)
    c, d = crow("g")
    y_x = c + d * pin_x
    y_r = d * pin_r

    # state updates
    def upd(k, in_x, in_r):
        Ak, Bk, _, _ = blocks[k]
        sl = slice(off[k], off[k] + sizes[k])
        A[sl, sl] = Ak
        A[sl, :] += Bk[:, 0:1] @ in_x[None, :]
        Brow_local = Bk[:, 0] * in_r
        Brow[sl.start : sl.stop] += Brow_local

    upd("rbl", e_x, e_r)
    upd("cl", ur_x, ur_r)
    upd("ct", v_x, v_r)
    upd("cd", np.eye(n)[iyp], 0.0)
    upd("g", pin_x, pin_r)
    A[iyp, :] = y_x
    Brow[iyp] += y_r

    eig = np.linalg.eigvals(A)
    i = np.argmax(np.abs(eig))
    f = abs(np.angle(eig[i])) / (2 * np.pi * ts)
    return np.abs(eig[i]), f


if __name__ == "__main__":
    from scratch_sim5 import build_cases

    for delay in (60e-6, 90e-6, 120e-6, 150e-6, 180e-6):
        models, _, _, _ = build_cases(delay, 0.5, 0.1, (1.047, 1.088, 1.165, 1.24))
        row = [f"delay={delay*1e6:3.0f}us:"]
        for i in (1, 5):
            rmax, fw = closed_loop_eigs(models[i])
            row.append(f"case{i} max|z|={rmax:.6f} (f~{fw:6.0f})")
        print("  ".join(row))
