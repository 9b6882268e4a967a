"""Optional FFTW backend for the collision-flux convolutions.

The batched padded transforms dominate the cost of a time step.  When the
system FFTW library is present it is used through ctypes for exactly the
two transform shapes of the hot path (4 real fields forward, 9 spectra
back); everything else keeps using scipy.  Results agree with the scipy
path to machine precision, so availability only changes speed.

Plans are created once per grid size with FFTW_MEASURE and always executed
on the buffers they were planned for, which keeps the alignment contract.
"""

import ctypes
import ctypes.util

import numpy as np

_FFTW_MEASURE = 0
_FFTW_DESTROY_INPUT = 1


def _load():
    for name in ("libfftw3.so.3", "libfftw3.so", "fftw3"):
        try:
            if name == "fftw3":
                found = ctypes.util.find_library("fftw3")
                if not found:
                    return None
                name = found
            lib = ctypes.CDLL(name)
            break
        except OSError:
            continue
    else:
        return None
    args = [ctypes.c_int, ctypes.POINTER(ctypes.c_int), ctypes.c_int,
            ctypes.c_void_p, ctypes.POINTER(ctypes.c_int),
            ctypes.c_int, ctypes.c_int,
            ctypes.c_void_p, ctypes.POINTER(ctypes.c_int),
            ctypes.c_int, ctypes.c_int, ctypes.c_uint]
    lib.fftw_plan_many_dft_r2c.restype = ctypes.c_void_p
    lib.fftw_plan_many_dft_r2c.argtypes = args
    lib.fftw_plan_many_dft_c2r.restype = ctypes.c_void_p
    lib.fftw_plan_many_dft_c2r.argtypes = args
    lib.fftw_execute.argtypes = [ctypes.c_void_p]
    lib.fftw_destroy_plan.argtypes = [ctypes.c_void_p]
    return lib


_LIB = _load()


def available() -> bool:
    return _LIB is not None


class PairTransforms:
    """Fixed-size transform pair for Convolver.pair_blocks."""

    def __init__(self, n: int, npad: int):
        if _LIB is None:
            raise RuntimeError("FFTW library not available")
        self.n = n
        self.P = P = npad
        Pr = P // 2 + 1
        self.fin = np.zeros((4, P, P, P))
        self.fout = np.empty((4, P, P, Pr), dtype=complex)
        self.iin = np.empty((9, P, P, Pr), dtype=complex)
        self.iout = np.empty((9, P, P, P))
        dims = (ctypes.c_int * 3)(P, P, P)

        def ptr(a):
            return ctypes.c_void_p(a.ctypes.data)

        self._plan_f = _LIB.fftw_plan_many_dft_r2c(
            3, dims, 4, ptr(self.fin), None, 1, P * P * P,
            ptr(self.fout), None, 1, P * P * Pr, _FFTW_MEASURE)
        self._plan_i = _LIB.fftw_plan_many_dft_c2r(
            3, dims, 9, ptr(self.iin), None, 1, P * P * Pr,
            ptr(self.iout), None, 1, P * P * P,
            _FFTW_MEASURE | _FFTW_DESTROY_INPUT)
        if not self._plan_f or not self._plan_i:
            raise RuntimeError("FFTW planning failed")
        # planning runs trial transforms through the buffers, so the padding
        # zeros must be restored afterwards
        self.fin[...] = 0.0

    def forward4(self, fields: np.ndarray) -> np.ndarray:
        """Spectra of the 4 zero-padded fields, shape (4, P, P, P/2+1)."""
        n = self.n
        self.fin[:, :n, :n, :n] = fields
        _LIB.fftw_execute(ctypes.c_void_p(self._plan_f))
        return self.fout

    def inverse9(self, scale: float) -> np.ndarray:
        """Inverse of the 9 spectra in ``iin``, cropped and scaled.

        The caller fills ``self.iin``; the 1/P^3 normalization is folded
        into ``scale``.  The input buffer is destroyed.
        """
        n = self.n
        _LIB.fftw_execute(ctypes.c_void_p(self._plan_i))
        return self.iout[:, :n, :n, :n] * scale

    def __del__(self):
        if _LIB is not None:
            for plan in (getattr(self, "_plan_f", None),
                         getattr(self, "_plan_i", None)):
                if plan:
                    _LIB.fftw_destroy_plan(ctypes.c_void_p(plan))


_REGISTRY: dict = {}


def get_plans(n: int, npad: int):
    """Shared PairTransforms per grid size, or None without FFTW.

    Plans depend only on the transform geometry, so convolvers for
    different kernels reuse the same buffers.
    """
    if _LIB is None:
        return None
    key = (n, npad)
    if key not in _REGISTRY:
        _REGISTRY[key] = PairTransforms(n, npad)
    return _REGISTRY[key]
