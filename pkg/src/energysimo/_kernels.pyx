# cython: language_level=3, boundscheck=False, wraparound=False, cdivision=True
"""Compiled Monte Carlo kernel for the averaged receive energy.

Consumes standard normals from a numpy bit generator in exactly the order
used by ``energysimo._fallback`` so both backends give identical samples.
"""

from cpython.pycapsule cimport PyCapsule_GetPointer, PyCapsule_IsValid
from libc.math cimport sqrt
from numpy.random cimport bitgen_t
from numpy.random.c_distributions cimport random_standard_normal


def sample_energies(bit_generator, double p, double mu_h, double sd_h,
                    double sd_z, Py_ssize_t n_ant, double[::1] out):
    """Fill ``out`` with independent draws of ``||h sqrt(p) + z||^2 / n_ant``.

    Per antenna, four normals are drawn in the order Re(h), Im(h), Re(z),
    Im(z); ``mu_h`` is the real line-of-sight mean, ``sd_h`` and ``sd_z``
    are per-component standard deviations.
    """
    cdef bitgen_t *rng
    cdef Py_ssize_t t, n
    cdef Py_ssize_t n_out = out.shape[0]
    cdef double amp = sqrt(p)
    cdef double acc, hr, hi, zr, zi, yr, yi

    capsule = bit_generator.capsule
    if not PyCapsule_IsValid(capsule, "BitGenerator"):
        raise ValueError("invalid bit generator capsule")
    rng = <bitgen_t *> PyCapsule_GetPointer(capsule, "BitGenerator")

    with bit_generator.lock, nogil:
        for t in range(n_out):
            acc = 0.0
            for n in range(n_ant):
                hr = mu_h + sd_h * random_standard_normal(rng)
                hi = sd_h * random_standard_normal(rng)
                zr = sd_z * random_standard_normal(rng)
                zi = sd_z * random_standard_normal(rng)
                yr = hr * amp + zr
                yi = hi * amp + zi
                acc = acc + (yr * yr + yi * yi)
            out[t] = acc / n_ant
