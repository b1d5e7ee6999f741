"""
Run-time limits shared by the evaluator, the program stepper and the simulator.
"""
import logging
import os
from typing import Optional

from attr import attrib, attrs
from attr.validators import in_, instance_of, optional

from vistautils.parameters import Parameters
from vistautils.range import Range

from smuc.errors import SmucError

MAX_ITERS_ENVIRONMENT_VARIABLE = "SMUC_MAX_ITERS"
DEFAULT_CHAIN_HEIGHT_HINT = 64
DEFAULT_FUEL = 10 ** 6


@attrs(frozen=True, slots=True)
class SmucSettings:
    """
    Limits used to turn non-termination into errors.

    `SMUC_MAX_ITERS` takes precedence over *max_iterations* in a parameters file;
    the command line applies its own flags on top of both.

    If *max_iterations* is unset, a fixpoint over a field with N nodes
    may take at most ``10 * N * chain_height_hint`` iterations.
    """

    chain_height_hint: int = attrib(
        validator=in_(Range.at_least(1)), default=DEFAULT_CHAIN_HEIGHT_HINT, kw_only=True
    )
    max_iterations: Optional[int] = attrib(
        validator=optional(in_(Range.at_least(1))), default=None, kw_only=True
    )
    fuel: int = attrib(
        validator=in_(Range.at_least(1)), default=DEFAULT_FUEL, kw_only=True
    )
    check_monotone: bool = attrib(validator=instance_of(bool), default=True, kw_only=True)

    def iteration_cap(self, node_count: int) -> int:
        if self.max_iterations is not None:
            return self.max_iterations
        return 10 * max(node_count, 1) * self.chain_height_hint

    @staticmethod
    def from_parameters(params: Parameters) -> "SmucSettings":
        max_iterations = params.optional_integer("max_iterations")
        from_environment = os.environ.get(MAX_ITERS_ENVIRONMENT_VARIABLE)
        if from_environment:
            try:
                max_iterations = int(from_environment)
            except ValueError:
                raise SmucError(
                    f"{MAX_ITERS_ENVIRONMENT_VARIABLE} must be a positive integer, "
                    f"got {from_environment!r}"
                )
            logging.info(
                "Iteration cap overridden from %s: %s",
                MAX_ITERS_ENVIRONMENT_VARIABLE,
                max_iterations,
            )
        return SmucSettings(
            chain_height_hint=params.integer(
                "chain_height_hint", default=DEFAULT_CHAIN_HEIGHT_HINT
            ),
            max_iterations=max_iterations,
            fuel=params.integer("fuel", default=DEFAULT_FUEL),
            check_monotone=params.boolean("check_monotone", default=True),
        )

    @staticmethod
    def default() -> "SmucSettings":
        return SmucSettings.from_parameters(Parameters.empty())
