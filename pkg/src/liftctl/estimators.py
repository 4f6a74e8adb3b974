"""scikit-learn style wrappers around the lifting maps and the controller.

``ConstraintLifter`` is a stateless transformer from bounded states
``(x1, x2)`` to lifted coordinates ``(z1, z2)``; ``BacksteppingController``
maps states to control inputs via ``predict``.  Both follow the usual
estimator contract: hyperparameters live in ``__init__`` untouched, and
fitted attributes end in an underscore.
"""

from __future__ import annotations

import numpy as np
from sklearn.base import BaseEstimator, TransformerMixin
from sklearn.utils.validation import check_array, check_is_fitted

from .controller import CommandSignal, GainSchedule, control
from .lifted_dynamics import LiftedSystem
from .lifting import lift, unlift
from .plant import PlantState, make_plant
from .sim import RunConfig, TrajectoryRecord, run

__all__ = ["BacksteppingController", "ConstraintLifter"]


def _as_states(X) -> np.ndarray:
    X = check_array(X, dtype=np.float64, ensure_all_finite=True)
    if X.shape[1] != 2:
        raise ValueError(f"expected 2 columns (x1, x2), got {X.shape[1]}")
    return X


class ConstraintLifter(TransformerMixin, BaseEstimator):
    """Map states in the safe box to lifted coordinates and back.

    Parameters
    ----------
    x1_bar, x2_bar : float
        Bounds of the safe box.
    sigmoid, sigmoid2 : str
        Catalog names of the sigmoid pairs; ``sigmoid2`` defaults to
        ``sigmoid``.
    guard_band : float or None
        Distance from the box edge below which lifting is refused.
    """

    def __init__(self, x1_bar=2.0, x2_bar=1.0, sigmoid="atanh", sigmoid2=None,
                 guard_band=None):
        self.x1_bar = x1_bar
        self.x2_bar = x2_bar
        self.sigmoid = sigmoid
        self.sigmoid2 = sigmoid2
        self.guard_band = guard_band

    def fit(self, X=None, y=None):
        plant = make_plant("double-integrator", self.x1_bar, self.x2_bar)
        self.system_ = LiftedSystem.from_names(plant, self.sigmoid, self.sigmoid2, self.guard_band)
        self.n_features_in_ = 2
        return self

    def transform(self, X):
        """Lift each row; raises DomainViolation if a row leaves the box."""
        check_is_fitted(self, "system_")
        X = _as_states(X)
        s = self.system_
        out = np.empty_like(X)
        for i, (x1, x2) in enumerate(X):
            out[i, 0] = lift(x1, s.x1_bar, s.pair1).z
            out[i, 1] = lift(x2, s.x2_bar, s.pair2).z
        return out

    def inverse_transform(self, Z):
        check_is_fitted(self, "system_")
        Z = _as_states(Z)
        s = self.system_
        out = np.empty_like(Z)
        for i, (z1, z2) in enumerate(Z):
            out[i, 0] = unlift(z1, s.x1_bar, s.pair1).x
            out[i, 1] = unlift(z2, s.x2_bar, s.pair2).x
        return out


class BacksteppingController(BaseEstimator):
    """Backstepping controller in lifted coordinates.

    ``predict`` evaluates the control law at a batch of states, all taken at
    the same time step ``k`` and with a fresh gain schedule per row, so it
    is a pure function of its inputs.  ``simulate`` runs the full closed
    loop, where the switching time is latched along the trajectory.
    """

    def __init__(self, x1_bar=2.0, x2_bar=1.0, plant="double-integrator", sigmoid="atanh",
                 sigmoid2=None, guard_band=1e-9, rho1=0.0, rho2="switching",
                 command="const:0", freeze_command=False, allow_unproven_rho1=False):
        self.x1_bar = x1_bar
        self.x2_bar = x2_bar
        self.plant = plant
        self.sigmoid = sigmoid
        self.sigmoid2 = sigmoid2
        self.guard_band = guard_band
        self.rho1 = rho1
        self.rho2 = rho2
        self.command = command
        self.freeze_command = freeze_command
        self.allow_unproven_rho1 = allow_unproven_rho1

    def _config(self, **extra) -> RunConfig:
        return RunConfig(
            x1_bar=self.x1_bar, x2_bar=self.x2_bar, plant=self.plant, sigmoid=self.sigmoid,
            sigmoid2=self.sigmoid2, guard_band=self.guard_band, rho1=self.rho1, rho2=self.rho2,
            command=self.command, freeze_command=self.freeze_command,
            allow_unproven_rho1=self.allow_unproven_rho1, **extra,
        )

    def fit(self, X=None, y=None):
        cfg = self._config()
        self.config_ = cfg
        self.system_ = cfg.system()
        self.gains_ = cfg.gains()
        self.command_ = cfg.command
        self.n_features_in_ = 2
        return self

    def predict(self, X, k=0):
        """Control input u for each state row at step ``k``."""
        check_is_fitted(self, "system_")
        X = _as_states(X)
        u = np.empty(X.shape[0])
        for i, (x1, x2) in enumerate(X):
            gains: GainSchedule = self.gains_.fresh()
            u[i] = control(self.system_, PlantState(x1, x2, k), self.command_, gains,
                           self.freeze_command).u
        return u

    def simulate(self, x0, steps=50) -> TrajectoryRecord:
        check_is_fitted(self, "system_")
        x1, x2 = (float(v) for v in np.asarray(x0, dtype=float).ravel())
        return run(self.config_.replace(x10=x1, x20=x2, steps=steps))

    @property
    def command_signal(self) -> CommandSignal:
        check_is_fitted(self, "command_")
        return self.command_
