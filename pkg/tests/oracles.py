"""Independent reference implementations used to pin down the fast paths.

Everything here is deliberately naive: subset enumeration for symmetric
functions, finite differences for gradients, characteristic polynomials
for eigenvalue bookkeeping.  Slow but hard to get wrong.
"""

import itertools

import numpy as np


def sigma_subsets(lam, m):
    """sigma_m by summing over all m-element subsets."""
    lam = np.asarray(lam, dtype=float)
    if m == 0:
        return 1.0
    if m > lam.size:
        return 0.0
    return float(sum(np.prod(lam[list(c)]) for c in itertools.combinations(range(lam.size), m)))


def sigma_charpoly(lam, m):
    """sigma_m from the characteristic polynomial of diag(lam)."""
    lam = np.asarray(lam, dtype=float)
    if m == 0:
        return 1.0
    coeffs = np.poly(lam)  # x^n - s1 x^{n-1} + s2 x^{n-2} - ...
    return float((-1.0) ** m * coeffs[m])


def sigma_excluding(lam, m, drop):
    """sigma_m of lam with the listed indices removed."""
    lam = np.asarray(lam, dtype=float)
    keep = [i for i in range(lam.size) if i not in set(drop)]
    return sigma_subsets(lam[keep], m)


def quotient(lam, k):
    return sigma_subsets(lam, k + 1) / sigma_subsets(lam, k)


def quotient_grad_fd(lam, k, step=1e-7):
    """Central-difference gradient of sigma_{k+1}/sigma_k."""
    lam = np.asarray(lam, dtype=float)
    out = np.empty_like(lam)
    for i in range(lam.size):
        up = lam.copy()
        dn = lam.copy()
        up[i] += step
        dn[i] -= step
        out[i] = (quotient(up, k) - quotient(dn, k)) / (2.0 * step)
    return out


def fd_even_derivatives(values, h):
    """Gradient and second derivative of an even-extension grid function.

    Matches the stencil contract of the production code but is written
    from scratch: ghost nodes mirror across both poles.
    """
    v = np.asarray(values, dtype=float)
    ext = np.concatenate(([v[1]], v, [v[-2]]))
    grad = (ext[2:] - ext[:-2]) / (2.0 * h)
    hess = (ext[2:] - 2.0 * v + ext[:-2]) / h**2
    return grad, hess
