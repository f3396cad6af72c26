"""Reference rollout kernel: batch-vectorized numpy.

All polynomials arrive tabulated over one shared monomial basis. The basis
is encoded incrementally: monomial k equals monomial parent[k] times
variable var[k], with monomial 0 the constant, so one multiply per basis
element builds the whole evaluation row.
"""
import numpy as np

NAME = "numpy"

REACHED, LEFT_X, TIMEOUT = 0, 1, 2


def rollout_batch(x0s, T, parent, var, f_coefs, g_coefs, u_coefs,
                  x_ineq, z_ineq, record=False):
    """Simulate x+ = f(x) + g(x) clamp(u(x)) from each start row of x0s.

    Stops each trajectory at the first state inside the target (reached,
    checked before the state-set exit test), the first state outside X
    (left_X), or after T steps (timeout). Returns (outcomes, steps,
    states, inputs); the last two are per-trajectory arrays when record is
    set and None otherwise. Recorded rows include the stopping state with
    the input the controller would apply there.
    """
    x = np.ascontiguousarray(x0s, dtype=float)
    B, n = x.shape
    M = parent.shape[0]
    m = u_coefs.shape[1]
    outcomes = np.full(B, TIMEOUT, dtype=np.int64)
    steps = np.full(B, T, dtype=np.int64)
    if record:
        rec_states = [[] for _ in range(B)]
        rec_inputs = [[] for _ in range(B)]
    active = np.arange(B)
    for t in range(T + 1):
        if len(active) == 0:
            break
        V = np.empty((len(active), M))
        V[:, 0] = 1.0
        for k in range(1, M):
            V[:, k] = V[:, parent[k]] * x[:, var[k]]
        u = np.clip(V @ u_coefs, -1.0, 1.0)
        if record:
            for row, b in enumerate(active):
                rec_states[b].append(x[row].copy())
                rec_inputs[b].append(u[row].copy())
        reached = (V @ z_ineq >= 0.0).all(axis=1)
        left = ~reached & (V @ x_ineq < 0.0).any(axis=1)
        done = reached | left
        if done.any():
            hit = active[done]
            outcomes[hit] = np.where(reached[done], REACHED, LEFT_X)
            steps[hit] = t
            active = active[~done]
            x, V, u = x[~done], V[~done], u[~done]
            if len(active) == 0:
                break
        if t == T:
            break
        gx = (V @ g_coefs).reshape(len(active), n, m)
        x = V @ f_coefs + np.einsum("bij,bj->bi", gx, u)
    if record:
        states = [np.array(s).reshape(-1, n) for s in rec_states]
        inputs = [np.array(s).reshape(-1, m) for s in rec_inputs]
        return outcomes, steps, states, inputs
    return outcomes, steps, None, None
