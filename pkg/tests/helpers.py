import numpy as np


def cnormal(gen, shape):
    return (gen.standard_normal(shape) + 1j * gen.standard_normal(shape)) / np.sqrt(2)


def random_psd(gen, n, ridge=0.1):
    g = cnormal(gen, (n, n))
    return g @ g.conj().T + ridge * np.eye(n)


def random_unitary(gen, m):
    q, r = np.linalg.qr(cnormal(gen, (m, m)))
    return q * (np.diagonal(r) / np.abs(np.diagonal(r)))


def same_up_to_row_phases(a, b, tol):
    """True when each row of ``a`` equals the matching row of ``b`` times a unit scalar."""
    for ra, rb in zip(a, b):
        inner = np.vdot(rb, ra)
        c = inner / abs(inner) if abs(inner) > 0 else 1.0
        if np.linalg.norm(ra - c * rb) > tol * max(1.0, np.linalg.norm(ra)):
            return False
    return True
