#!/usr/bin/env python3
"""
Model Factory for creating ablation-arm model instances
"""

from enum import Enum
from typing import Callable, Dict, Optional

from common.exceptions import ConfigError
from .base import NetworkModel
from .config import NormSection, TsmNetConfig
from .euclidean import EuclideanTsmNet
from .tsmnet import TsmNetModel


class AblationArm(Enum):
    """Enum for the registered model variants"""
    SPDDSMBN = "spddsmbn"
    SPDBN_DS = "spdbn_ds"
    SPDMBN_NO_DS = "spdmbn_no_ds"
    EUCLID_DSMBN = "euclid_dsmbn"
    EUCLID_MBN_NO_DS = "euclid_mbn_no_ds"


ModelBuilder = Callable[[TsmNetConfig, NormSection, int], NetworkModel]


class ModelFactory:
    """Factory for creating models by ablation arm"""

    PROPOSED = AblationArm.SPDDSMBN

    _arm_registry: Dict[AblationArm, ModelBuilder] = {
        AblationArm.SPDDSMBN: lambda net, norm, seed: TsmNetModel(net, norm.to_bn_config("spdmbn"), True, seed),
        AblationArm.SPDBN_DS: lambda net, norm, seed: TsmNetModel(net, norm.to_bn_config("spdbn"), True, seed),
        AblationArm.SPDMBN_NO_DS: lambda net, norm, seed: TsmNetModel(net, norm.to_bn_config("spdmbn"), False, seed),
        AblationArm.EUCLID_DSMBN: lambda net, norm, seed: EuclideanTsmNet(net, norm.to_bn_config("spdmbn"), True, seed),
        AblationArm.EUCLID_MBN_NO_DS: lambda net, norm, seed: EuclideanTsmNet(net, norm.to_bn_config("spdmbn"), False,
                                                                              seed),
    }

    @classmethod
    def parse_arm(cls, arm) -> AblationArm:
        if isinstance(arm, AblationArm):
            return arm
        try:
            return AblationArm(str(arm).lower())
        except ValueError:
            raise ConfigError(f"Unsupported arm: {arm}. Available arms: {', '.join(cls.get_available_arms())}",
                              "model.arm")

    @classmethod
    def create_model(cls, arm, net: TsmNetConfig, norm: Optional[NormSection] = None,
                     seed: int = 0) -> NetworkModel:
        """
        Create a model instance for an ablation arm.

        Args:
            arm: AblationArm or its string value
            net: Layer sizes (already resolved against the dataset)
            norm: Normalization settings; defaults when omitted
            seed: Seed for weight initialization

        Returns:
            The freshly initialized model
        """
        arm = cls.parse_arm(arm)
        if arm not in cls._arm_registry:
            raise ConfigError(f"Unsupported arm: {arm.value}", "model.arm")
        model = cls._arm_registry[arm](net, norm or NormSection(), seed)
        model.arm = arm.value
        return model

    @classmethod
    def get_available_arms(cls) -> list:
        """Get the values of all registered arms"""
        return [arm.value for arm in cls._arm_registry]

    @classmethod
    def register_arm(cls, arm: AblationArm, builder: ModelBuilder):
        """Register a builder for an arm"""
        cls._arm_registry[arm] = builder

    @classmethod
    def is_arm_supported(cls, arm) -> bool:
        try:
            return cls.parse_arm(arm) in cls._arm_registry
        except ConfigError:
            return False
