"""
Runtime configuration.

Values come from the environment (optionally a ``.env`` file in the working
directory) and are validated once.
"""

import os
from functools import lru_cache
from typing import Optional

from dotenv import load_dotenv
from pydantic import BaseModel, ConfigDict, Field, ValidationError

from .errors import ConfigurationError

ENV_PREFIX = "SUBSPACE_MAPPER_"


class Settings(BaseModel):
    """Tunable limits and defaults"""

    model_config = ConfigDict(frozen=True)

    log_level: str = Field("WARNING", description="Root log level")
    log_config: Optional[str] = Field(None, description="dictConfig JSON overriding the packaged one")
    dense_cap: int = Field(4096, ge=1, description="Largest dimension for dense linear algebra")
    sparse_cap: int = Field(1 << 20, ge=1, description="Largest subspace for the sparse eigensolver")
    max_unitary_qubits: int = Field(12, ge=1, le=16, description="Largest circuit turned into a dense unitary")
    hermiticity_max_orbitals: int = Field(14, ge=0, description="Largest Fock space checked for Hermiticity on load")
    seed: int = Field(0, ge=0, description="Default sampling seed")
    workers: int = Field(4, ge=1, description="Thread count for circuit runs and batch eigensolves")

    @classmethod
    def from_env(cls) -> "Settings":
        values = {}
        for name in cls.model_fields:
            raw = os.getenv(ENV_PREFIX + name.upper())
            if raw is not None and raw != "":
                values[name] = raw
        try:
            return cls(**values)
        except ValidationError as e:
            raise ConfigurationError(f"invalid environment configuration: {e}") from e


@lru_cache(maxsize=1)
def get_settings() -> Settings:
    """Load ``.env`` once and return the cached settings"""
    load_dotenv()
    return Settings.from_env()
