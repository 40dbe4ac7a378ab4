"""The worked example instruments, available by name from the CLI."""
from __future__ import annotations

from typing import Callable, Dict

import numpy as np

from .algebra import AlgebraSpec
from .cpmap import cpmap_from_kraus, zero_map
from .instrument import POVM, Instrument, instrument_from_povm_naimark, luders


def luders_povm(t: float) -> POVM:
    """``mu(1) = t E11 + (1-t) E22``, ``mu(2) = (1-t) E11 + t E22``."""
    return POVM([np.diag([t, 1 - t]), np.diag([1 - t, t])])


def luders_t(t: float = 0.25) -> Instrument:
    """Lueders instrument of :func:`luders_povm` on ``M_2``."""
    if not 0 < t < 1:
        raise ValueError(f"t must lie in (0, 1), got {t}")
    return luders(luders_povm(t))


def diagonal() -> Instrument:
    """``Phi_i(a) = a_ii E_ii`` on ``M_2``; its total map is the diagonal part."""
    spec = AlgebraSpec([2])
    e = np.eye(2)
    return Instrument(spec, 2, [cpmap_from_kraus(spec, 2, [[np.outer(e[i], e[i])]])
                                for i in range(2)])


def omega_povm() -> POVM:
    """Four rank-one effects on ``C^2`` built from ``omega = exp(2 pi i / 3)``."""
    w = np.exp(2j * np.pi / 3)
    r2 = np.sqrt(2)
    return POVM([
        np.array([[0.5, 0], [0, 0]]),
        np.array([[1, r2], [r2, 2]]) / 6,
        np.array([[1, r2 * w ** 2], [r2 * w, 2]]) / 6,
        np.array([[1, r2 * w], [r2 * w ** 2, 2]]) / 6,
    ])


def omega_instrument() -> Instrument:
    """Naimark-built instrument ``Phi_i(a) = a_i mu(i)`` over ``C^4``."""
    return instrument_from_povm_naimark(omega_povm())


def corner_isometry() -> np.ndarray:
    return np.eye(4)[:, :2].astype(complex)


def pure_4_2() -> Instrument:
    """``I(1, X) = W^* X W`` on ``M_4`` with ``W`` the first two columns, ``I(2) = 0``."""
    spec = AlgebraSpec([4])
    w = corner_isometry()
    return Instrument(spec, 2, [cpmap_from_kraus(spec, 2, [[w]]), zero_map(spec, 2)])


EXAMPLES: Dict[str, Callable[..., Instrument]] = {
    "luders-t": luders_t,
    "diagonal": diagonal,
    "omega-povm": omega_instrument,
    "pure-4-2": pure_4_2,
}


def example(name: str, t: float = 0.25) -> Instrument:
    if name not in EXAMPLES:
        raise KeyError(f"unknown example {name!r}; choose from {', '.join(EXAMPLES)}")
    return EXAMPLES[name](t) if name == "luders-t" else EXAMPLES[name]()
