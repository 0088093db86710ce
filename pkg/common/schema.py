#!/usr/bin/env python3
"""
Shared pydantic base for configuration and report models.
"""

from typing import Any, Dict, Optional, Type, TypeVar

from pydantic import BaseModel, ConfigDict, ValidationError

from .exceptions import ConfigError


T = TypeVar("T", bound="StrictModel")


class StrictModel(BaseModel):
    """Pydantic model that rejects unknown keys"""

    model_config = ConfigDict(extra="forbid", validate_assignment=True)

    @classmethod
    def parse_section(cls: Type[T], data: Optional[Dict[str, Any]], section: Optional[str] = None) -> T:
        """Validate a dict, converting pydantic errors into ConfigError with field paths"""
        try:
            return cls.model_validate(data or {})
        except ValidationError as e:
            raise ConfigError.from_validation_error(e, section)
