"""Log-distance path loss and the received-power to reception-probability map."""

from __future__ import annotations

import math

from .config import PathLoss


def received_power(distance: float, params: PathLoss, shadowing_db: float = 0.0) -> float:
    if distance <= 0:
        raise ValueError("distance must be positive")
    return params.pr_d0_dbm - 10.0 * params.eta * math.log10(distance / params.d0_m) + shadowing_db


def link_prr(distance: float, params: PathLoss, shadowing_db: float = 0.0) -> float:
    """Probability that one packet is received over a link.

    A packet succeeds when the mean received power plus a per-packet
    ``Normal(0, sigma_db)`` fade clears the receiver sensitivity, so the PRR is
    the normal tail ``P[X > sensitivity - P_r]``.  ``shadowing_db`` is a static
    per-link offset added to the mean.
    """
    pr = received_power(distance, params, shadowing_db)
    if params.sigma_db == 0:
        return 1.0 if pr > params.sensitivity_dbm else 0.0
    z = (pr - params.sensitivity_dbm) / params.sigma_db
    return min(1.0, max(0.0, 0.5 * math.erfc(-z / math.sqrt(2.0))))
