"""Pure numpy/scipy versions of the compiled kernels (same signatures)."""
import numpy as np
import scipy.sparse as sp


def quad_eval(indptr, indices, data, owner, u, m, scale):
    n = u.shape[0]
    f = sp.csr_matrix((data, indices, indptr), shape=(len(indptr) - 1, n))
    fu = f @ u
    q = np.bincount(owner, weights=fu * fu, minlength=m)
    agg = sp.csr_matrix((scale * fu, (owner, np.arange(len(owner)))), shape=(m, len(owner)))
    g = (agg @ f).toarray()
    return q, g


def gram(indptr, indices, data, row_weight, n):
    f = sp.csr_matrix((data, indices, indptr), shape=(len(indptr) - 1, n))
    return (f.T @ sp.diags(row_weight) @ f).toarray()
