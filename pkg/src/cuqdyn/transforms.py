"""Monotone observation transforms applied to both data and model output.

Working in a transformed space makes multiplicative or otherwise
heteroscedastic noise approximately homoscedastic, which is the regime the
calibration algorithms assume. The same transform must be applied to the
dataset (:func:`apply_transform`) and to the model predictions
(:func:`transform_model`); prediction bounds are mapped back with
:func:`invert_transform_bounds`.
"""

import dataclasses

import numpy as np

from .datagen import Dataset
from .exceptions import NonPositiveInput
from .ode import OdeModel

__all__ = [
    "Transform",
    "parse_transform",
    "apply_transform",
    "invert_transform_bounds",
    "transform_model",
]

_KINDS = ("identity", "log", "box_cox")


def parse_transform(spec):
    """Transform from a config/CLI string: identity, log, or box_cox:<l>.

    Box-Cox accepts comma-separated per-coordinate shape values, e.g.
    "box_cox:0.5" or "box_cox:0,0.5". Passing a Transform or None through is
    allowed so callers need not special-case programmatic use.
    """
    if spec is None:
        return Transform.identity()
    if isinstance(spec, Transform):
        return spec
    name, _, arg = str(spec).strip().partition(":")
    name = name.strip().lower().replace("-", "_")
    if name == "identity":
        return Transform.identity()
    if name == "log":
        return Transform.log()
    if name == "box_cox":
        if not arg:
            raise ValueError("box_cox needs a shape value, e.g. box_cox:0.5")
        vals = [float(v) for v in arg.split(",")]
        return Transform.box_cox(vals[0] if len(vals) == 1 else vals)
    raise ValueError(f"unknown transform '{spec}'")


@dataclasses.dataclass(frozen=True)
class Transform:
    """One of identity, log, or Box-Cox with shape parameter ``lmbda``.

    ``lmbda`` may be a scalar or a per-coordinate vector; ``lmbda = 0``
    coordinates reduce to log. Build instances via the factory classmethods.

    >>> Transform.box_cox(1.0).apply(5.0)
    4.0
    """

    kind: str
    lmbda: object = None

    def __post_init__(self):
        if self.kind not in _KINDS:
            raise ValueError(f"kind must be one of {_KINDS}")
        if self.kind == "box_cox":
            lam = np.asarray(self.lmbda, dtype=float)
            if lam.ndim > 1 or not np.all(np.isfinite(lam)):
                raise ValueError("box_cox lmbda must be a finite scalar or vector")
            object.__setattr__(self, "lmbda", lam)

    @classmethod
    def identity(cls):
        return cls("identity")

    @classmethod
    def log(cls):
        return cls("log")

    @classmethod
    def box_cox(cls, lmbda):
        return cls("box_cox", lmbda)

    @property
    def tag(self):
        if self.kind == "box_cox":
            lam = np.atleast_1d(self.lmbda)
            return "box_cox(" + ",".join(f"{v:g}" for v in lam) + ")"
        return self.kind

    def _check_positive(self, values):
        if np.any(np.asarray(values) <= 0):
            raise NonPositiveInput(
                f"{self.kind} transform requires strictly positive values"
            )

    def apply(self, values):
        """Elementwise forward transform; columns map to coordinates."""
        values = np.asarray(values, dtype=float)
        if self.kind == "identity":
            return values
        self._check_positive(values)
        if self.kind == "log":
            return np.log(values)
        lam = np.broadcast_to(self.lmbda, values.shape[-1:] if values.ndim else ())
        lam, values = np.broadcast_arrays(lam, values)
        out = np.empty_like(values, dtype=float)
        zero = lam == 0.0
        out[zero] = np.log(values[zero])
        out[~zero] = (values[~zero] ** lam[~zero] - 1.0) / lam[~zero]
        return out if out.ndim else float(out)

    def invert(self, values):
        """Elementwise inverse; total on the transform's range.

        For Box-Cox with lmbda != 0 the base ``lmbda*v + 1`` is clamped to a
        tiny positive value so endpoints that fall below the range map to the
        range's infimum instead of NaN.
        """
        values = np.asarray(values, dtype=float)
        if self.kind == "identity":
            return values
        if self.kind == "log":
            return np.exp(values)
        lam = np.broadcast_to(self.lmbda, values.shape[-1:] if values.ndim else ())
        lam, values = np.broadcast_arrays(lam, values)
        out = np.empty_like(values, dtype=float)
        zero = lam == 0.0
        out[zero] = np.exp(values[zero])
        base = np.maximum(lam[~zero] * values[~zero] + 1.0, 1e-300)
        out[~zero] = base ** (1.0 / lam[~zero])
        return out if out.ndim else float(out)


def apply_transform(dataset, transform):
    """Transform every observation of a dataset; identity returns it as-is."""
    if transform.kind == "identity":
        return dataset
    y = transform.apply(dataset.y)
    meta = dict(dataset.meta)
    meta["transform"] = transform.tag
    return Dataset(dataset.times, y, meta)


def invert_transform_bounds(region, transform):
    """Map a prediction region back to the original space endpoint-wise.

    Monotonicity of the transform keeps lower bounds below upper bounds.
    """
    if transform.kind == "identity":
        return region
    center = region.center
    return dataclasses.replace(
        region,
        lpb=transform.invert(region.lpb),
        upb=transform.invert(region.upb),
        center=None if center is None else transform.invert(center),
    )


def transform_model(model, transform):
    """Model whose observation map is composed with the transform.

    Fitting this wrapped model against a transformed dataset realizes the
    transform-both-sides scheme with the untransformed machinery.
    """
    if transform.kind == "identity":
        return model
    base_observe = model.observe

    def observe(state, params, time):
        return transform.apply(base_observe(state, params, time))

    return OdeModel(
        name=f"{model.name}[{transform.tag}]",
        n_x=model.n_x,
        n_y=model.n_y,
        n_theta=model.n_theta,
        rhs=model.rhs,
        x0=model.x0,
        observe=observe,
        bounds=model.bounds,
    )
