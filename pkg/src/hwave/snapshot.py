"""Binary field snapshot format "HWF1".

Layout (all little-endian):
    magic   4 bytes  b"HWF1"
    header  5 x u32  n, k_max, lambda node count, nr, ntau
    arrays  f64      lambda nodes, lambda weights           (if node count > 0)
            f64      coefficients as (re, im) pairs, row-major (k, lambda)
            f64      r nodes, tau nodes, values row-major    (if nr*ntau > 0)

A snapshot can hold a spectral block, a physical block, or both; absent
blocks are signalled by zero dimensions.
"""

from __future__ import annotations

import struct

import numpy as np

from .errors import ValidationError
from .fourier import LambdaGrid, PhysicalField, SpectralField
from .hermite import HermiteBasisSpec

MAGIC = b"HWF1"
_HEADER = struct.Struct("<5I")


def write_snapshot(path, spectral: SpectralField | None = None,
                   physical: PhysicalField | None = None,
                   u_halfwidth: float = 12.0, u_points: int | None = None):
    """Serialize the given field(s) to `path`."""
    if spectral is None and physical is None:
        raise ValidationError("nothing to write")
    n = spectral.basis.n if spectral is not None else physical.n
    k_max = spectral.basis.k_max if spectral is not None else 0
    n_lam = spectral.grid.nodes.size if spectral is not None else 0
    nr = physical.r_nodes.size if physical is not None else 0
    ntau = physical.tau_nodes.size if physical is not None else 0
    if spectral is not None and physical is not None and physical.n != n:
        raise ValidationError("spectral and physical blocks disagree on half-dimension")
    with open(path, "wb") as fh:
        fh.write(MAGIC)
        fh.write(_HEADER.pack(n, k_max, n_lam, nr, ntau))
        if spectral is not None:
            fh.write(np.ascontiguousarray(spectral.grid.nodes, "<f8").tobytes())
            fh.write(np.ascontiguousarray(spectral.grid.weights, "<f8").tobytes())
            inter = np.empty((k_max + 1, n_lam, 2))
            inter[:, :, 0] = spectral.coeffs.real
            inter[:, :, 1] = spectral.coeffs.imag
            fh.write(np.ascontiguousarray(inter, "<f8").tobytes())
        if physical is not None:
            fh.write(np.ascontiguousarray(physical.r_nodes, "<f8").tobytes())
            fh.write(np.ascontiguousarray(physical.tau_nodes, "<f8").tobytes())
            fh.write(np.ascontiguousarray(physical.values, "<f8").tobytes())


def read_snapshot(path, u_halfwidth: float = 12.0, u_points: int | None = None):
    """Read a snapshot; returns (spectral or None, physical or None).

    The Hermite evaluation interval is not part of the format; the returned
    basis uses the provided interval parameters.
    """
    with open(path, "rb") as fh:
        magic = fh.read(4)
        if magic != MAGIC:
            raise ValidationError(f"bad magic {magic!r}, expected {MAGIC!r}")
        n, k_max, n_lam, nr, ntau = _HEADER.unpack(fh.read(_HEADER.size))

        def read_f64(count):
            buf = fh.read(8 * count)
            if len(buf) != 8 * count:
                raise ValidationError("truncated snapshot")
            return np.frombuffer(buf, "<f8").copy()

        spectral = None
        if n_lam:
            nodes = read_f64(n_lam)
            weights = read_f64(n_lam)
            raw = read_f64((k_max + 1) * n_lam * 2).reshape(k_max + 1, n_lam, 2)
            pts = u_points if u_points is not None else max(64, 4 * k_max)
            basis = HermiteBasisSpec(n=n, k_max=k_max, u_halfwidth=u_halfwidth,
                                     u_points=pts)
            grid = LambdaGrid(n=n, nodes=nodes, weights=weights)
            spectral = SpectralField(basis, grid, raw[:, :, 0] + 1j * raw[:, :, 1])
        physical = None
        if nr and ntau:
            r_nodes = read_f64(nr)
            tau_nodes = read_f64(ntau)
            values = read_f64(nr * ntau).reshape(nr, ntau)
            physical = PhysicalField(r_nodes, tau_nodes, values, n=n)
        return spectral, physical
