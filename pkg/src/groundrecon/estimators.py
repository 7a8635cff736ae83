"""Estimator-style wrappers (fit / transform / predict) over the pipeline stages."""
from __future__ import annotations

import numpy as np
from sklearn.base import BaseEstimator, RegressorMixin, TransformerMixin
from sklearn.utils.validation import check_is_fitted

from .camera_est import GridSpec, estimate_camera_detailed
from .core import CameraIntrinsics, CameraPose
from .metrics import absrel_delta1, align_scale_shift
from .reproject import EPS_Z, reconstruct_cloud
from .validation import check_camera, check_depth, check_mask, check_perspective_field, check_pixel_heights


class CameraFieldEstimator(BaseEstimator):
    """Recover (fov, pitch, roll) from a perspective field by grid search."""

    def __init__(
        self,
        fov_range=(20.0, 110.0),
        pitch_range=(-70.0, 70.0),
        roll_range=(-45.0, 45.0),
        step=2.0,
        levels=3,
        shrink=0.25,
        polish=False,
    ):
        self.fov_range = fov_range
        self.pitch_range = pitch_range
        self.roll_range = roll_range
        self.step = step
        self.levels = levels
        self.shrink = shrink
        self.polish = polish

    def _grid(self):
        return GridSpec(
            fov_range=tuple(self.fov_range),
            fov_step=self.step,
            pitch_range=tuple(self.pitch_range),
            pitch_step=self.step,
            roll_range=tuple(self.roll_range),
            roll_step=self.step,
            levels=self.levels,
            shrink=self.shrink,
            polish=self.polish,
        )

    def fit(self, X, y=None, mask=None):
        pf = check_perspective_field(X)
        est = estimate_camera_detailed(pf, check_mask(mask, pf.shape), self._grid())
        self.fov_deg_, self.pitch_deg_, self.roll_deg_ = est.camera
        self.cost_ = est.cost
        self.history_ = list(est.history)
        H, W = pf.shape
        self.camera_ = (CameraIntrinsics(est.fov_deg, W, H), CameraPose(est.pitch_deg, est.roll_deg))
        return self

    def predict(self, X):
        """``(n, 3)`` array of (fov, pitch, roll) for one field or a list of fields."""
        fields = X if isinstance(X, (list, tuple)) else [X]
        grid = self._grid()
        return np.array([estimate_camera_detailed(check_perspective_field(f), None, grid).camera for f in fields])

    def score(self, X, y=None):
        """Negative field residual of the fitted camera on ``X``."""
        from .camera_est import perspective_field_cost

        check_is_fitted(self, "camera_")
        return -perspective_field_cost(check_perspective_field(X), self.camera_)


class PixelHeightReprojector(TransformerMixin, BaseEstimator):
    """Pixel heights (+ perspective field) to scale-invariant point clouds.

    ``X`` is a ``(PixelHeightMap, PerspectiveField)`` pair. ``fit`` fixes
    the camera, either the one given or one estimated from the field.
    """

    def __init__(self, camera=None, eps_z=EPS_Z, max_invalid_fraction=0.5, grid=None):
        self.camera = camera
        self.eps_z = eps_z
        self.max_invalid_fraction = max_invalid_fraction
        self.grid = grid

    def fit(self, X, y=None):
        ph, pf = X
        check_pixel_heights(ph)
        camera = check_camera(self.camera)
        if camera is None:
            if pf is None:
                raise ValueError("need a perspective field to estimate the camera")
            est = estimate_camera_detailed(check_perspective_field(pf), None, self.grid or GridSpec(polish=True))
            H, W = pf.shape
            camera = (CameraIntrinsics(est.fov_deg, W, H), CameraPose(est.pitch_deg, est.roll_deg))
            self.camera_cost_ = est.cost
        self.camera_ = camera
        return self

    def transform(self, X):
        check_is_fitted(self, "camera_")
        ph, pf = X
        return reconstruct_cloud(
            check_pixel_heights(ph),
            pf,
            camera=self.camera_,
            eps_z=self.eps_z,
            max_invalid_fraction=self.max_invalid_fraction,
        )


class ScaleShiftAligner(RegressorMixin, BaseEstimator):
    """Least-squares scale and shift of a predicted depth map onto the ground truth."""

    def __init__(self, space="depth"):
        self.space = space

    def fit(self, X, y, mask=None):
        pred, gt = check_depth(X, "prediction"), check_depth(y, "ground truth")
        self.scale_, self.shift_, _ = align_scale_shift(pred, gt, check_mask(mask, gt.shape), self.space)
        return self

    def predict(self, X):
        check_is_fitted(self, "scale_")
        pred = check_depth(X, "prediction")
        if self.space == "depth":
            return self.scale_ * pred + self.shift_
        with np.errstate(divide="ignore", invalid="ignore"):
            return 1.0 / (self.scale_ / pred + self.shift_)

    def score(self, X, y, mask=None):
        """delta1 of the aligned prediction."""
        return absrel_delta1(self.predict(X), check_depth(y, "ground truth"), mask)[1]
