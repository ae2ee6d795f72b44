"""
Input Schemas
pydantic models for the space context and group spec JSON files.
"""

import json
import logging
from pathlib import Path
from typing import List, Literal, Optional, Union

import numpy as np
from pydantic import BaseModel, ConfigDict, Field, ValidationError, model_validator

from .core_geometry import TOLERANCE, SpaceContext
from .errors import SpecValidationError
from .pseudohyperbolic import MIN_RHO_GAP
from .schottky import SchottkyGroup, build_group

logger = logging.getLogger("SpecLoader")

Matrix = List[List[float]]


class SpaceContextModel(BaseModel):
    """{"d", "gram_Q", "basis_S", "basis_T"}; omitted matrices give the coordinate splitting."""

    model_config = ConfigDict(extra="forbid")

    d: int = Field(ge=1)
    gram_Q: Optional[Matrix] = None
    basis_S: Optional[Matrix] = None
    basis_T: Optional[Matrix] = None
    orientation_S: Literal[1, -1] = 1
    orientation_T: Literal[1, -1] = 1

    @model_validator(mode="after")
    def _all_or_nothing(self) -> "SpaceContextModel":
        given = [m is not None for m in (self.gram_Q, self.basis_S, self.basis_T)]
        if any(given) and not all(given):
            raise ValueError("gram_Q, basis_S and basis_T must be given together")
        return self

    def to_context(self, allow_even: bool = False) -> SpaceContext:
        if self.gram_Q is None:
            return SpaceContext.standard(self.d, self.orientation_S, self.orientation_T, allow_even=allow_even)
        return SpaceContext(
            d=self.d,
            gram_Q=np.array(self.gram_Q),
            basis_S=np.array(self.basis_S),
            basis_T=np.array(self.basis_T),
            orientation_S=self.orientation_S,
            orientation_T=self.orientation_T,
            allow_even=allow_even,
        )

    @classmethod
    def from_context(cls, ctx: SpaceContext) -> "SpaceContextModel":
        return cls.model_validate(ctx.to_dict())


class GroupSpecModel(BaseModel):
    """
    A Schottky group on the rotation family: 2n angles, their pairing into
    frames (V_<, V_>), one dynamical part g_< per generator and the
    target angle epsilon. Optional radii override choose_radii; optional
    translations define the affine deformation.
    """

    model_config = ConfigDict(extra="forbid")

    d: int = Field(ge=1)
    n: int = Field(ge=1)
    thetas: Optional[List[float]] = None
    pairing: List[List[int]]
    g_less: List[Matrix]
    epsilon: float = Field(gt=0.0, le=float(np.pi / 2))
    radii: Optional[List[float]] = None
    translations: Optional[Matrix] = None
    space: Optional[SpaceContextModel] = None

    @model_validator(mode="after")
    def _consistent_shapes(self) -> "GroupSpecModel":
        d, n = self.d, self.n
        if self.thetas is not None and len(self.thetas) != 2 * n:
            raise ValueError(f"thetas must hold {2 * n} angles, got {len(self.thetas)}")
        if len(self.pairing) != n or any(len(pair) != 2 for pair in self.pairing):
            raise ValueError(f"pairing must hold {n} pairs")
        if len(self.g_less) != n:
            raise ValueError(f"g_less must hold {n} matrices, got {len(self.g_less)}")
        for i, A in enumerate(self.g_less):
            if len(A) != d or any(len(row) != d for row in A):
                raise ValueError(f"g_less[{i}] must be {d}x{d}")
        if self.radii is not None and len(self.radii) != n:
            raise ValueError(f"radii must hold {n} values, got {len(self.radii)}")
        if self.translations is not None:
            if len(self.translations) != n or any(len(t) != 2 * d + 1 for t in self.translations):
                raise ValueError(f"translations must be {n} vectors of length {2 * d + 1}")
        if self.space is not None and self.space.d != d:
            raise ValueError(f"space.d={self.space.d} differs from d={d}")
        return self

    def context(self) -> SpaceContext:
        """Raises EvenDimensionError for even d."""
        if self.space is not None:
            return self.space.to_context()
        return SpaceContext.standard(self.d)

    def build(self, min_rho_gap: float = MIN_RHO_GAP, tol: float = TOLERANCE) -> SchottkyGroup:
        return build_group(
            self.context(),
            self.n,
            self.thetas,
            self.pairing,
            [np.array(A) for A in self.g_less],
            self.epsilon,
            self.radii,
            min_rho_gap,
            tol,
        )

    def translation_array(self) -> Optional[np.ndarray]:
        return None if self.translations is None else np.array(self.translations, dtype=float)


def _read_json(path: Union[str, Path]) -> object:
    try:
        with open(path, 'r', encoding='utf-8') as f:
            return json.load(f)
    except json.JSONDecodeError as e:
        logger.error(f"Invalid JSON in {path}: {e}")
        raise SpecValidationError(f"invalid JSON in {path}: {e}") from e
    except OSError as e:
        raise SpecValidationError(f"cannot read {path}: {e}") from e


def parse_group_spec(data: object) -> GroupSpecModel:
    try:
        return GroupSpecModel.model_validate(data)
    except ValidationError as e:
        raise SpecValidationError(f"malformed group spec: {e}") from e


def load_group_spec(path: Union[str, Path]) -> GroupSpecModel:
    """
    Read and validate a group spec file.

    Raises:
        SpecValidationError: On unreadable files, invalid JSON or schema violations
    """
    spec = parse_group_spec(_read_json(path))
    logger.info(f"Loaded group spec from {path}: d={spec.d}, n={spec.n}")
    return spec


def load_space_context(path: Union[str, Path]) -> SpaceContext:
    try:
        model = SpaceContextModel.model_validate(_read_json(path))
    except ValidationError as e:
        raise SpecValidationError(f"malformed space context: {e}") from e
    return model.to_context()
