"""Drop-or-trust-blindly compiler."""
from __future__ import annotations

from .core import InvalidParam, StepChoice  # noqa: F401  (re-exported)


def dtb_step(choice: StepChoice, guidance, tau: float, env, alg_rng):
    """Adopt ``guidance`` with probability ``tau`` if it is a valid answer.

    The trust coin is always drawn from ``env`` (even for invalid guidance or
    forced outcomes) so streams stay aligned across parameter sweeps.

    Returns:
        ``(answer, trusted)``.
    """
    trust = env.bernoulli(tau)
    if trust and guidance in choice.valid_set:
        return guidance, True
    return choice.sampler(alg_rng), False


class DtbWrapped:
    """OAG algorithm obtained by wrapping a base online algorithm."""

    def __init__(self, base, tau: float):
        if not 0 <= tau <= 1:
            raise InvalidParam(f"tau={tau} outside [0, 1]")
        self.base = base
        self.tau = tau
        # the valid sets and bookkeeping are the base algorithm's own
        self.start = base.start
        self.choose = base.choose
        self.commit = base.commit

    def decide(self, choice, guidance, env, alg_rng):
        return dtb_step(choice, guidance, self.tau, env, alg_rng)

    def __repr__(self):
        return f"DtbWrapped({self.base!r}, tau={self.tau})"


def dtb_transform(base, tau: float) -> DtbWrapped:
    return DtbWrapped(base, tau)
