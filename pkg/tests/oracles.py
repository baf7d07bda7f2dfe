"""Independent reference computations used by the tests.

None of these share code paths with the package routines they check.
"""

import numpy as np
import scipy.linalg as sla


def gauss_jordan_inverse(M):
    """Inverse by Gauss-Jordan elimination with partial pivoting."""
    M = np.array(M, dtype=float)
    n = len(M)
    A = np.hstack([M, np.eye(n)])
    for col in range(n):
        piv = col + int(np.argmax(np.abs(A[col:, col])))
        A[[col, piv]] = A[[piv, col]]
        A[col] /= A[col, col]
        for row in range(n):
            if row != col:
                A[row] -= A[row, col] * A[col]
    return A[:, n:]


def capacitance_by_rule(L, c):
    """Capacitance matrix written out entry by entry from the construction rule."""
    M = np.zeros((L, L))
    for i in range(L):
        neighbours = (i > 0) + (i < L - 1)
        M[i, i] = 1 + neighbours * c
        if i > 0:
            M[i, i - 1] = -c
        if i < L - 1:
            M[i, i + 1] = -c
    return M


def rk4_schrodinger(H2, psi0, t, dt):
    """Plain RK4 for i dpsi/dt = H psi; returns psi(t)."""
    H2 = np.asarray(H2, dtype=complex)
    psi = np.asarray(psi0, dtype=complex).copy()
    n = int(round(t / dt))
    h = t / n if n else 0.0
    f = lambda y: -1j * (H2 @ y)
    for _ in range(n):
        k1 = f(psi)
        k2 = f(psi + 0.5 * h * k1)
        k3 = f(psi + 0.5 * h * k2)
        k4 = f(psi + h * k3)
        psi = psi + h / 6 * (k1 + 2 * k2 + 2 * k3 + k4)
    return psi


def eigenbasis_readout_evolution(H2, Gamma, rho0_site, times):
    """Readout master equation built from the kernel elements in the H2 eigenbasis.

    Basis order ``{0, 1/2, M_1..M_L}``. Nonzero kernel entries:
    R_{00,hh} = -Gamma, R_{hh,hh} = Gamma, R_{hh,MN} = -lam_MN,
    R_{M0,N0} = R_{0M,0N} = lam_MN / 2,
    R_{MN,PQ} = (delta_MP lam_NQ + delta_NQ lam_MP) / 2,
    lam_MN = Gamma <M|L><L|N>. Solved exactly with a matrix exponential.
    Returns site-basis density matrices.
    """
    L = H2.shape[0]
    n = L + 2
    E, V = np.linalg.eigh(H2)
    energies = np.concatenate([[0.0, 0.0], E])
    lam = Gamma * np.outer(V[-1, :], V[-1, :])
    R = np.zeros((n, n, n, n))
    R[0, 0, 1, 1] = -Gamma
    R[1, 1, 1, 1] = Gamma
    R[1, 1, 2:, 2:] = -lam
    for M in range(L):
        for N in range(L):
            R[2 + M, 0, 2 + N, 0] = 0.5 * lam[M, N]
            R[0, 2 + M, 0, 2 + N] = 0.5 * lam[N, M]
            for P in range(L):
                for Q in range(L):
                    R[2 + M, 2 + N, 2 + P, 2 + Q] = 0.5 * ((M == P) * lam[N, Q] + (N == Q) * lam[M, P])
    G = -R.reshape(n * n, n * n).astype(complex)
    G -= 1j * np.diag((energies[:, None] - energies[None, :]).ravel())

    U = np.eye(n)
    U[2:, 2:] = V  # columns: eigenvectors in site basis
    rho0_eig = U.T @ rho0_site @ U
    out = []
    for t in times:
        r = (sla.expm(G * t) @ rho0_eig.ravel()).reshape(n, n)
        out.append(U @ r @ U.T)
    return np.array(out)


def stochastic_populations(H2, W, u0, gamma, psi0, times, n_traj=2000, dt=0.01, seed=0):
    """Average site populations over trajectories with white gate-charge noise.

    Each island's gate charge gets q_i -> q_i + xi_i(t), piecewise constant
    over dt with variance gamma / (u0^2 dt); this shifts the one-pair
    energies by -u0 (W xi)_j. Each step is integrated exactly.
    """
    rng = np.random.default_rng(seed)
    L = H2.shape[0]
    psi = np.tile(np.asarray(psi0, dtype=complex), (n_traj, 1))
    sigma = np.sqrt(gamma / (u0**2 * dt))
    n_steps = int(round(max(times) / dt))
    checkpoints = {int(round(t / dt)): t for t in times}
    out = {}
    if 0 in checkpoints:
        out[checkpoints[0]] = np.mean(np.abs(psi) ** 2, axis=0)
    for step in range(1, n_steps + 1):
        xi = sigma * rng.standard_normal((n_traj, L))
        shifts = -u0 * xi @ W.T
        Hs = np.broadcast_to(H2, (n_traj, L, L)).copy()
        Hs[:, np.arange(L), np.arange(L)] += shifts
        e, v = np.linalg.eigh(Hs)
        c = np.einsum("kji,kj->ki", v.conj(), psi)
        psi = np.einsum("kij,kj->ki", v, np.exp(-1j * e * dt) * c)
        if step in checkpoints:
            out[checkpoints[step]] = np.mean(np.abs(psi) ** 2, axis=0)
    return np.array([out[t] for t in times])
