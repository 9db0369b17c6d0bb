"""Built-in benchmark systems: logistic, Lotka-Volterra, alpha-pinene, NFKB.

Each entry carries the generating parameter values, default initial state,
default sampling horizon and an optimization box. The boxes are chosen to
bracket the generating values generously while keeping multistart search
tractable; zero-valued NFKB parameters cannot use multiplicative bounds and
are pinned at zero.
"""

from dataclasses import dataclass
from typing import Optional

import numpy as np

from . import _kernels, ode
from .exceptions import UnknownModel
from .ode import OdeModel

__all__ = ["ModelSpec", "registry_get", "model_names", "nfkb_observe", "with_initial_state"]

# NFKB state order, fixed package-wide (index -> species):
#  0 IKKn          neutral IKK kinase
#  1 IKKa          active IKK
#  2 IKKi          inactive IKK
#  3 IKKaIkBa      IKKa:IkBa complex
#  4 IKKaIkBaNFkB  IKKa:IkBa:NFkB complex
#  5 NFkB          cytoplasmic free NFkB
#  6 NFkBn         nuclear NFkB
#  7 A20           A20 protein
#  8 A20t          A20 transcript
#  9 IkBa          cytoplasmic IkBa
# 10 IkBan         nuclear IkBa
# 11 IkBat         IkBa transcript
# 12 IkBaNFkB      IkBa:NFkB complex
# 13 IkBanNFkBn    nuclear IkBa:NFkB complex
# 14 cgent         reporter gene transcript
NFKB_STATE_NAMES = (
    "IKKn", "IKKa", "IKKi", "IKKaIkBa", "IKKaIkBaNFkB", "NFkB", "NFkBn",
    "A20", "A20t", "IkBa", "IkBan", "IkBat", "IkBaNFkB", "IkBanNFkBn", "cgent",
)
NFKB_PARAM_NAMES = (
    "a1", "a2", "t1", "a3", "t2", "c1a", "c2a", "c3a", "c4a", "c5a", "c6a",
    "c1", "c2", "c3", "c4", "c5", "k1", "k2", "k3", "kprod", "kdeg", "kv",
    "i1", "e2a", "i1a", "e1a", "c1c", "c2c", "c3c",
)
NFKB_TRUE_PARAMS = np.array([
    5e-01,    # a1
    2e-01,    # a2
    1e-01,    # t1
    1e+00,    # a3
    1e-01,    # t2
    5e-07,    # c1a
    0e+00,    # c2a
    4e-04,    # c3a
    5e-01,    # c4a
    1e-04,    # c5a
    2e-05,    # c6a
    5e-07,    # c1
    0e+00,    # c2
    4e-04,    # c3
    5e-01,    # c4
    3e-04,    # c5
    2.5e-03,  # k1
    1e-01,    # k2
    1.5e-03,  # k3
    2.5e-05,  # kprod
    1.25e-04, # kdeg
    5e+00,    # kv
    2.5e-03,  # i1
    1e-02,    # e2a
    1e-03,    # i1a
    5e-04,    # e1a
    5e-07,    # c1c
    0e+00,    # c2c
    4e-04,    # c3c
])

# Rest-like initial state; the source material gives the point count of the
# NFKB scenario but not its initial condition, so this documented choice puts
# the free kinase at its production/decay balance kprod/kdeg = 0.2 and the
# whole NFkB pool (0.06) into the cytoplasmic IkBa:NFkB complex.
NFKB_DEFAULT_X0 = np.zeros(15)
NFKB_DEFAULT_X0[0] = 0.2
NFKB_DEFAULT_X0[12] = 0.06
NFKB_DEFAULT_X0.setflags(write=False)


@dataclass(frozen=True)
class ModelSpec:
    """Registry entry: the model plus its default scenario settings.

    ``default_n`` counts noisy observations; the sampling grid prepends the
    exactly-known initial point, so a size-10 scenario spans 11 grid times.
    """

    model: OdeModel
    true_params: Optional[np.ndarray]
    default_x0: np.ndarray
    default_horizon: tuple
    default_n: int

    def default_grid(self, n_points=None):
        """Uniform time grid with ``n_points`` noisy rows plus the t0 row."""
        n = self.default_n if n_points is None else int(n_points)
        lo, hi = self.default_horizon
        return np.linspace(lo, hi, n + 1)


def nfkb_observe(state):
    """Six observables of the 15-dimensional NFKB state.

    Returns (NFkBn, IkBa + IkBaNFkB, A20t, IKKn + IKKa + IKKi, IKKa, IkBat).
    Accepts a single state vector or a matrix with states in rows.
    """
    s = np.asarray(state, dtype=float)
    return np.stack(
        [
            s[..., 6],
            s[..., 9] + s[..., 12],
            s[..., 8],
            s[..., 0] + s[..., 1] + s[..., 2],
            s[..., 1],
            s[..., 11],
        ],
        axis=-1,
    )


def _identity_observe(state, params, time):
    return state


def _frozen(a):
    a = np.asarray(a, dtype=float)
    a.setflags(write=False)
    return a


def _build_registry():
    registry = {}

    logistic = OdeModel(
        name="logistic",
        n_x=1,
        n_y=1,
        n_theta=2,
        rhs=_kernels.logistic_rhs,
        x0=lambda theta: np.array([10.0]),
        observe=_identity_observe,
        bounds=np.array([[1e-3, 1.0], [1.0, 1000.0]]),
    )
    registry["logistic"] = ModelSpec(
        model=logistic,
        true_params=_frozen([0.1, 100.0]),
        default_x0=_frozen([10.0]),
        default_horizon=(0.0, 100.0),
        default_n=10,
    )

    lotka_volterra = OdeModel(
        name="lotka_volterra",
        n_x=2,
        n_y=2,
        n_theta=4,
        rhs=_kernels.lotka_volterra_rhs,
        x0=lambda theta: np.array([10.0, 5.0]),
        observe=_identity_observe,
        # growth/decay rates in [1e-3, 1], interaction strengths in [1e-3, 0.1]
        bounds=np.array([[1e-3, 1.0], [1e-3, 0.1], [1e-3, 1.0], [1e-3, 0.1]]),
    )
    registry["lotka_volterra"] = ModelSpec(
        model=lotka_volterra,
        true_params=_frozen([0.5, 0.02, 0.5, 0.02]),
        default_x0=_frozen([10.0, 5.0]),
        default_horizon=(0.0, 30.0),
        default_n=30,
    )

    alpha_pinene = OdeModel(
        name="alpha_pinene",
        n_x=5,
        n_y=5,
        n_theta=5,
        rhs=_kernels.alpha_pinene_rhs,
        x0=lambda theta: np.array([100.0, 0.0, 0.0, 0.0, 0.0]),
        observe=_identity_observe,
        bounds=np.array([[0.0, 1.0]] * 5),
    )
    registry["alpha_pinene"] = ModelSpec(
        model=alpha_pinene,
        true_params=_frozen([5.93e-05, 2.96e-05, 2.05e-05, 2.75e-04, 4.00e-05]),
        default_x0=_frozen([100.0, 0.0, 0.0, 0.0, 0.0]),
        default_horizon=(0.0, 36420.0),
        default_n=10,
    )

    lo = np.where(NFKB_TRUE_PARAMS > 0, NFKB_TRUE_PARAMS / 50.0, 0.0)
    hi = np.where(NFKB_TRUE_PARAMS > 0, NFKB_TRUE_PARAMS * 50.0, 0.0)
    nfkb = OdeModel(
        name="nfkb",
        n_x=15,
        n_y=6,
        n_theta=29,
        rhs=_kernels.nfkb_rhs,
        x0=lambda theta: NFKB_DEFAULT_X0.copy(),
        observe=lambda state, params, time: nfkb_observe(state),
        bounds=np.column_stack([lo, hi]),
    )
    registry["nfkb"] = ModelSpec(
        model=nfkb,
        true_params=_frozen(NFKB_TRUE_PARAMS),
        default_x0=_frozen(NFKB_DEFAULT_X0),
        default_horizon=(0.0, 3600.0),
        default_n=12,
    )

    # route the registry models through the compiled kernels
    ode._KERNEL_IDS[logistic.rhs] = _kernels.KID_LOGISTIC
    ode._KERNEL_IDS[lotka_volterra.rhs] = _kernels.KID_LOTKA_VOLTERRA
    ode._KERNEL_IDS[alpha_pinene.rhs] = _kernels.KID_ALPHA_PINENE
    ode._KERNEL_IDS[nfkb.rhs] = _kernels.KID_NFKB
    return registry


_REGISTRY = _build_registry()


def model_names():
    """Names accepted by :func:`registry_get`, in registration order."""
    return tuple(_REGISTRY)


def registry_get(name):
    """Look up a built-in model by name.

    Raises
    ------
    UnknownModel
        If ``name`` is not one of ``model_names()``.
    """
    try:
        return _REGISTRY[name]
    except KeyError:
        raise UnknownModel(
            f"unknown model '{name}'; available: {', '.join(_REGISTRY)}"
        ) from None


def with_initial_state(model, x0):
    """Copy of ``model`` with a fixed initial state vector.

    Used for fitting datasets whose t0 row disagrees with the registry
    default, e.g. measured initial concentrations. Only valid when the
    observation map is the identity (the initial observables determine the
    full state).
    """
    x0 = np.asarray(x0, dtype=float).copy()
    if x0.shape != (model.n_x,):
        raise ValueError(f"x0 must have shape ({model.n_x},), got {x0.shape}")
    return OdeModel(
        name=model.name,
        n_x=model.n_x,
        n_y=model.n_y,
        n_theta=model.n_theta,
        rhs=model.rhs,
        x0=lambda theta: x0.copy(),
        observe=model.observe,
        bounds=model.bounds,
    )
