"""Pure-numpy twin of the compiled energy kernel.

Draws the same normals in the same order as ``_kernels.sample_energies`` and
accumulates antenna energies sequentially (``cumsum``), so results match the
compiled path bit for bit.
"""

import numpy as np

# trials per vectorised chunk; bounds the (chunk, n_ant, 4) temporary
_CHUNK_ELEMS = 1 << 20


def sample_energies(bit_generator, p, mu_h, sd_h, sd_z, n_ant, out):
    gen = np.random.Generator(bit_generator)
    amp = np.sqrt(p)
    n_out = out.shape[0]
    chunk = max(1, _CHUNK_ELEMS // (4 * n_ant))
    for start in range(0, n_out, chunk):
        stop = min(n_out, start + chunk)
        x = gen.standard_normal((stop - start, n_ant, 4))
        hr = mu_h + sd_h * x[..., 0]
        hi = sd_h * x[..., 1]
        zr = sd_z * x[..., 2]
        zi = sd_z * x[..., 3]
        yr = hr * amp + zr
        yi = hi * amp + zi
        e = yr * yr + yi * yi
        out[start:stop] = np.cumsum(e, axis=1)[:, -1] / n_ant
