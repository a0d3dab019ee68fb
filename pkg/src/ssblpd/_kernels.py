"""Compiled inner loop of the correlator scan."""
import numba


@numba.njit(cache=True)
def accumulate_power(y, cols, acc, first):
    """acc[f, j] (+)= |y[f, cols[j]]|^2"""
    for f in range(acc.shape[0]):
        for j in range(cols.size):
            v = y[f, cols[j]]
            p = v.real * v.real + v.imag * v.imag
            if first:
                acc[f, j] = p
            else:
                acc[f, j] += p
