#!/usr/bin/env python3
"""
Riemannian ADAM Optimizer

ADAM over a mixed parameter set. Euclidean parameters get the usual update
with decoupled weight decay. Stiefel parameters get the projected gradient,
elementwise moments in the ambient representation, a QR-retracted step, and
their first moment re-projected onto the tangent space at the new point.
"""

from dataclasses import dataclass, field
from typing import Dict, Iterable, Tuple

import numpy as np

from common.exceptions import InvalidInputError, NonFiniteGradientError
from .params import Parameter
from .stiefel import check_stiefel, stiefel_project, stiefel_retract


STIEFEL_STEP_TOLERANCE = 1e-8


@dataclass
class AdamState:
    """Step count, hyperparameters and per-parameter moment accumulators"""
    lr: float = 1e-3
    betas: Tuple[float, float] = (0.9, 0.999)
    weight_decay: float = 1e-4
    eps: float = 1e-8
    step: int = 0
    exp_avg: Dict[str, np.ndarray] = field(default_factory=dict)
    exp_avg_sq: Dict[str, np.ndarray] = field(default_factory=dict)

    def __post_init__(self):
        beta1, beta2 = self.betas
        if not self.lr > 0:
            raise InvalidInputError(f"learning rate must be positive, got {self.lr}")
        if not (0.0 <= beta1 < 1.0 and 0.0 <= beta2 < 1.0):
            raise InvalidInputError(f"betas must lie in [0, 1), got {self.betas}")
        if self.weight_decay < 0 or not self.eps > 0:
            raise InvalidInputError("weight_decay must be >= 0 and eps > 0")
        self.betas = (float(beta1), float(beta2))

    def hyperparameters(self) -> Dict[str, float]:
        return {
            "lr": self.lr,
            "beta1": self.betas[0],
            "beta2": self.betas[1],
            "weight_decay": self.weight_decay,
            "eps": self.eps,
        }


class RiemannianAdam:
    """ADAM over Euclidean and Stiefel parameters"""

    def __init__(self, params: Iterable[Parameter], lr: float = 1e-3,
                 betas: Tuple[float, float] = (0.9, 0.999),
                 weight_decay: float = 1e-4, eps: float = 1e-8):
        self.params: Dict[str, Parameter] = {}
        for param in params:
            if param.name in self.params:
                raise InvalidInputError(f"duplicate parameter name '{param.name}'")
            self.params[param.name] = param
        self.state = AdamState(lr=lr, betas=betas, weight_decay=weight_decay, eps=eps)

        for name, param in self.params.items():
            self.state.exp_avg[name] = np.zeros_like(param.value)
            self.state.exp_avg_sq[name] = np.zeros_like(param.value)

    def zero_grad(self):
        for param in self.params.values():
            param.zero_grad()

    def _check_gradients(self, step: int):
        for name, param in self.params.items():
            if not np.all(np.isfinite(param.grad)):
                raise NonFiniteGradientError(name, step)

    def step(self):
        """Apply one update to every parameter using its accumulated gradient"""
        state = self.state
        step = state.step + 1
        # all gradients are checked before anything is modified
        self._check_gradients(step)

        beta1, beta2 = state.betas
        correction1 = 1.0 - beta1 ** step
        correction2 = 1.0 - beta2 ** step

        # nothing is committed until every parameter has a valid update
        staged = {}
        for name, param in self.params.items():
            grad = param.grad
            if param.is_stiefel:
                grad = stiefel_project(param.value, grad)

            exp_avg = beta1 * state.exp_avg[name] + (1.0 - beta1) * grad
            exp_avg_sq = beta2 * state.exp_avg_sq[name] + (1.0 - beta2) * grad * grad
            direction = (exp_avg / correction1) / (np.sqrt(exp_avg_sq / correction2) + state.eps)

            if param.is_stiefel:
                new_value = stiefel_retract(param.value, -state.lr * stiefel_project(param.value, direction))
                check_stiefel(new_value, name, STIEFEL_STEP_TOLERANCE)
                exp_avg = stiefel_project(new_value, exp_avg)
            else:
                new_value = param.value
                if param.space.weight_decay_applies and state.weight_decay > 0:
                    new_value = new_value * (1.0 - state.lr * state.weight_decay)
                new_value = new_value - state.lr * direction

            staged[name] = (new_value, exp_avg, exp_avg_sq)

        for name, (new_value, exp_avg, exp_avg_sq) in staged.items():
            self.params[name].value = new_value
            state.exp_avg[name] = exp_avg
            state.exp_avg_sq[name] = exp_avg_sq
        state.step = step

    def state_dict(self) -> Dict[str, object]:
        """Tensors and hyperparameters needed to resume optimization exactly"""
        tensors = {}
        for name in self.params:
            tensors[f"exp_avg/{name}"] = self.state.exp_avg[name].copy()
            tensors[f"exp_avg_sq/{name}"] = self.state.exp_avg_sq[name].copy()
        return {"step": self.state.step, "hyperparameters": self.state.hyperparameters(), "tensors": tensors}

    def load_state_dict(self, state: Dict[str, object]):
        tensors = state["tensors"]
        for name, param in self.params.items():
            for prefix, target in (("exp_avg", self.state.exp_avg), ("exp_avg_sq", self.state.exp_avg_sq)):
                value = np.asarray(tensors[f"{prefix}/{name}"], dtype=np.float64)
                if value.shape != param.value.shape:
                    raise InvalidInputError(f"optimizer moment {prefix}/{name} has shape {value.shape}, "
                                            f"expected {param.value.shape}")
                target[name] = value.copy()
        self.state.step = int(state["step"])
