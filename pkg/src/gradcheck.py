#!/usr/bin/env python3
"""
Finite-Difference Gradient Suite

Every backward pass is compared with central differences along random
directions: symmetric directions for matrix-valued inputs, tangent
directions for Stiefel parameters, and unconstrained directions elsewhere.
Normalization statistics are frozen while checking, so they act as
constants exactly as they do in the backward pass.
"""

from typing import Callable, List, Optional

import numpy as np
from pydantic import BaseModel

from common import console
from geometry.manifold import random_spd
from geometry.matfun import ScalarFun, spd_map, spd_map_backward, sym
from layers.base import Layer, Mode
from layers.classifier import LinearSoftmax
from layers.conv import SpatialConv, TemporalConv
from layers.euclidean_bn import EuclideanDSMBN, LogVariancePooling
from layers.spd import BiMap, CovariancePooling, ReEig, TangentSpaceMapping
from layers.spdbn import BnMode, RunningGeoStats, SPDMBN, SpdBnConfig
from models.base import NetworkModel
from models.batch import EpochBatch
from models.config import NormSection, TsmNetConfig
from models.factory import ModelFactory
from optim.params import Parameter
from optim.stiefel import stiefel_project


FD_STEP = 1e-6
ERROR_FLOOR = 1e-10
LAYER_TOLERANCE = 1e-5
END_TO_END_TOLERANCE = 1e-4
DIRECTIONS = 3


class GradCheckRow(BaseModel):
    name: str
    max_relative_error: float
    tolerance: float

    @property
    def passed(self) -> bool:
        return self.max_relative_error < self.tolerance


class GradCheckReport(BaseModel):
    seed: int
    config_hash: str = ""
    rows: List[GradCheckRow] = []

    @property
    def passed(self) -> bool:
        return all(row.passed for row in self.rows)

    def failures(self) -> dict:
        return {row.name: row.max_relative_error for row in self.rows if not row.passed}


def relative_error(numeric: float, analytic: float) -> float:
    return abs(numeric - analytic) / max(abs(numeric), abs(analytic), ERROR_FLOOR)


def directional_error(loss_at: Callable[[np.ndarray], float], gradient: np.ndarray,
                      point: np.ndarray, direction: np.ndarray, step: float = FD_STEP) -> float:
    """Relative error between <gradient, direction> and the central difference of loss_at"""
    numeric = (loss_at(point + step * direction) - loss_at(point - step * direction)) / (2.0 * step)
    return relative_error(numeric, float(np.sum(gradient * direction)))


def _direction(shape, rng: np.random.Generator, symmetric: bool = False) -> np.ndarray:
    d = rng.standard_normal(shape)
    if symmetric:
        d = sym(d)
    return d / np.linalg.norm(d)


def _param_direction(param: Parameter, rng: np.random.Generator) -> np.ndarray:
    d = rng.standard_normal(param.value.shape)
    if param.is_stiefel:
        d = stiefel_project(param.value, d)
    return d / max(np.linalg.norm(d), ERROR_FLOOR)


def _check_param(param: Parameter, loss: Callable[[], float], gradient: np.ndarray,
                 rng: np.random.Generator) -> float:
    original = param.value.copy()

    def loss_at(value):
        param.value = value
        try:
            return loss()
        finally:
            param.value = original

    return max(directional_error(loss_at, gradient, original, _param_direction(param, rng))
               for _ in range(DIRECTIONS))


def check_matrix_function(f: ScalarFun, rng: np.random.Generator, dim: int = 5) -> float:
    z = random_spd(dim, rng, spread=1.0, size=3)
    upstream = sym(rng.standard_normal(z.shape))
    gradient = spd_map_backward(z, f, upstream)

    def loss_at(x):
        return float(np.sum(upstream * spd_map(x, f)))

    return max(directional_error(loss_at, gradient, z, _direction(z.shape, rng, True)) for _ in range(DIRECTIONS))


def check_layer(layer: Layer, x: np.ndarray, rng: np.random.Generator, symmetric_input: bool = False,
                forward: Optional[Callable] = None, backward: Optional[Callable] = None) -> float:
    """Input and parameter gradients of sum(U * layer(x)) in train mode"""
    forward = forward or (lambda inp: layer.forward(inp, Mode.TRAIN))
    backward = backward or layer.backward
    upstream = rng.standard_normal(forward(x).shape)

    def loss_at(inp):
        return float(np.sum(upstream * forward(inp)))

    layer.zero_grad()
    forward(x)
    d_x = backward(upstream)
    errors = [directional_error(loss_at, d_x, x, _direction(x.shape, rng, symmetric_input))
              for _ in range(DIRECTIONS)]
    for param in layer.parameters().values():
        gradient = param.grad.copy()
        errors.append(_check_param(param, lambda: loss_at(x), gradient, rng))
    return max(errors)


def check_normalization(mode: BnMode, rng: np.random.Generator, dim: int = 4) -> float:
    layer = SPDMBN(dim, SpdBnConfig(mode=mode))
    layer.stats = RunningGeoStats(random_spd(dim, rng), 0.7, random_spd(dim, rng), 0.5, 3)
    batch = random_spd(dim, rng, size=6)
    upstream = sym(rng.standard_normal(batch.shape))

    def loss_at(inp):
        return float(np.sum(upstream * layer.forward(inp, Mode.TRAIN)))

    with layer.frozen_statistics():
        layer.forward(batch, Mode.TRAIN)
        d_batch, d_log_nu = layer.backward(upstream)
        errors = [directional_error(loss_at, d_batch, batch, _direction(batch.shape, rng, True))
                  for _ in range(DIRECTIONS)]
        if mode != BnMode.RBN:
            errors.append(_check_param(layer.params.log_nu, lambda: loss_at(batch), np.asarray(d_log_nu), rng))
    return max(errors)


def check_classifier(rng: np.random.Generator, features: int = 6, classes: int = 3) -> float:
    layer = LinearSoftmax(features, classes, weight=rng.standard_normal((features + 1, classes)))
    x = rng.standard_normal((8, features))
    labels = rng.integers(0, classes, 8)

    def loss_at(inp):
        return layer.forward(inp, Mode.TRAIN, labels=labels).loss

    layer.zero_grad()
    loss_at(x)
    d_x = layer.backward(1.0)
    errors = [directional_error(loss_at, d_x, x, _direction(x.shape, rng)) for _ in range(DIRECTIONS)]
    errors.append(_check_param(layer.weight, lambda: loss_at(x), layer.weight.grad.copy(), rng))
    return max(errors)


def check_domain_layer(layer, x: np.ndarray, domains: np.ndarray, rng: np.random.Generator,
                       symmetric_input: bool) -> float:
    """Dispatchers are checked with the statistics accumulated by one warm-up batch, then frozen"""
    layer.forward(x, domains, Mode.TRAIN)

    def forward(inp):
        out = layer.forward(inp, domains, Mode.TRAIN)
        return out[0] if isinstance(out, tuple) else out

    backward = layer.backward
    if isinstance(layer, TangentSpaceMapping):
        context = layer.bn.frozen_statistics()
    else:
        context = layer.frozen_statistics()
    with context:
        upstream = rng.standard_normal(forward(x).shape)

        def loss_at(inp):
            return float(np.sum(upstream * forward(inp)))

        for param in layer.parameters().values():
            param.zero_grad()
        forward(x)
        d_x = backward(upstream)
        errors = [directional_error(loss_at, d_x, x, _direction(x.shape, rng, symmetric_input))
                  for _ in range(DIRECTIONS)]
        for param in layer.parameters().values():
            errors.append(_check_param(param, lambda: loss_at(x), param.grad.copy(), rng))
    return max(errors)


def check_model(model: NetworkModel, rng: np.random.Generator, trials_per_domain: int = 3) -> float:
    """End-to-end loss gradients of every parameter"""
    config = model.config
    domains = np.repeat([0, 1], trials_per_domain)
    batch = EpochBatch(rng.standard_normal((domains.size, config.channels, config.time)), domains,
                       rng.integers(0, config.classes, domains.size))
    # zero-initialized classifiers pass no gradient downstream
    model.classifier.weight.value = rng.standard_normal(model.classifier.weight.value.shape)
    model.forward(batch, Mode.TRAIN)

    def loss():
        return model.forward(batch, Mode.TRAIN).loss

    errors = []
    with model.frozen_statistics():
        model.zero_grad()
        loss()
        model.backward()
        for param in model.parameters().values():
            errors.append(_check_param(param, loss, param.grad.copy(), rng))
    return max(errors)


def tiny_config() -> TsmNetConfig:
    return TsmNetConfig(channels=4, time=32, classes=2, temporal_filters=2, temporal_kernel=5,
                        spatio_spectral_filters=6, subspace_dim=3)


def run_gradcheck(net: Optional[TsmNetConfig] = None, norm: Optional[NormSection] = None, seed: int = 0,
                  config_hash: str = "") -> GradCheckReport:
    """Run the full suite; the report lists the worst relative error per component"""
    net = net or tiny_config()
    norm = norm or NormSection()
    rng = np.random.default_rng(seed)
    report = GradCheckReport(seed=seed, config_hash=config_hash)

    def add(name: str, error: float, tolerance: float = LAYER_TOLERANCE):
        report.rows.append(GradCheckRow(name=name, max_relative_error=float(error), tolerance=tolerance))
        console.debug(f"gradcheck {name}: {error:.3e}")

    for f in (ScalarFun.log(), ScalarFun.exp(), ScalarFun.sqrt(), ScalarFun.inv_sqrt(),
              ScalarFun.power(0.7), ScalarFun.power(2.0), ScalarFun.re_threshold(1.0)):
        add(f"matfun.{f}", check_matrix_function(f, rng))

    for mode in BnMode:
        add(f"spdbn.{mode.value}", check_normalization(mode, rng))

    channels, filters, spatial, sub = net.channels, net.temporal_filters, net.spatio_spectral_filters, net.subspace_dim
    add("temporal", check_layer(TemporalConv(filters, net.temporal_kernel, rng), rng.standard_normal(
        (2, 1, channels, net.time)), rng))
    add("spatial", check_layer(SpatialConv(spatial, filters, channels, rng),
                               rng.standard_normal((2, filters, channels, net.time)), rng))
    add("covpool", check_layer(CovariancePooling(), rng.standard_normal((2, spatial, net.time)), rng))
    add("bimap", check_layer(BiMap(spatial, sub, rng), random_spd(spatial, rng, size=2), rng, True))
    add("reeig", check_layer(ReEig(1.0), random_spd(sub, rng, spread=1.5, size=2), rng, True))

    domains = np.repeat([0, 1], 3)
    bn_config = norm.to_bn_config()
    add("tsm", check_domain_layer(TangentSpaceMapping(sub, bn_config), random_spd(sub, rng, size=6),
                                  domains, rng, True))
    add("logvar", check_layer(LogVariancePooling(), rng.standard_normal((2, spatial, net.time)), rng))
    add("euclidean_dsmbn", check_domain_layer(EuclideanDSMBN(spatial, bn_config),
                                              rng.standard_normal((6, spatial)), domains, rng, False))
    add("classifier", check_classifier(rng))

    for arm in ModelFactory.get_available_arms():
        model = ModelFactory.create_model(arm, net, norm, seed)
        add(f"model.{arm}", check_model(model, rng), END_TO_END_TOLERANCE)
    return report
