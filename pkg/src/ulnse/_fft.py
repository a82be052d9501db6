"""Thin wrappers over scipy.fft that honour the UL_NSE_THREADS cap."""

import os

import scipy.fft as _sfft


def workers():
    raw = os.environ.get("UL_NSE_THREADS")
    if not raw:
        return 1
    try:
        value = int(raw)
    except ValueError:
        raise ValueError(f"UL_NSE_THREADS must be an integer, got {raw!r}") from None
    if value < 1:
        raise ValueError(f"UL_NSE_THREADS must be >= 1, got {value}")
    return value


def fft2(a):
    return _sfft.fft2(a, workers=workers())


def ifft2(a):
    return _sfft.ifft2(a, workers=workers())


def rfft2(a):
    return _sfft.rfft2(a, workers=workers())


def irfft2(a, n):
    return _sfft.irfft2(a, s=(n, n), workers=workers())


def ifft(a, axis=-1):
    return _sfft.ifft(a, axis=axis, workers=workers())


def fft(a, axis=-1):
    return _sfft.fft(a, axis=axis, workers=workers())
