"""Binary logit between the composite transit mode and driving alone."""
from __future__ import annotations

import math
from dataclasses import dataclass
from enum import Enum

from fixflex.errors import NoViableModeError


class Mode(str, Enum):
    TRANSIT = "Transit"
    AUTO = "Auto"


@dataclass
class ModeChoiceState:
    rq_id: int
    prob_transit: float | None = None
    prob_transit_prev: float | None = None
    chosen_mode: Mode | None = None
    draw_count: int = 0


def transit_utility(attrs, betas):
    # attribute terms enter as disutilities; ASC is additive
    if attrs is None:
        return -math.inf
    return betas.t0 - (betas.t_wk * attrs.walk_time + betas.m_wt * attrs.micro_wait
                       + betas.f_wt * attrs.frt_wait + betas.m_ivt * attrs.micro_ivtt
                       + betas.f_ivt * attrs.frt_ivtt + betas.t_fr * attrs.fare
                       + betas.f_trfr * attrs.transfers)


def auto_utility(attrs, betas):
    if attrs is None:
        return -math.inf
    return betas.d0 - (betas.d_ivt * attrs.auto_ivtt + betas.d_gas * attrs.gas_cost)


def choice_probability(v_transit, v_auto):
    """Pr(transit) = exp(V_T) / (exp(V_T) + exp(V_D)), max-shifted."""
    if v_transit == -math.inf and v_auto == -math.inf:
        raise NoViableModeError("both modes unavailable")
    m = max(v_transit, v_auto)
    et = math.exp(v_transit - m)
    ed = math.exp(v_auto - m)
    return et / (et + ed)


def assign_mode(state, new_prob, eta, rng):
    """Threshold-gated Monte Carlo mode assignment.

    Redraws only when the transit probability moved by more than ``eta``
    since the last iteration (or on the first assignment); otherwise the
    previous mode is kept and the RNG is left untouched.
    """
    redraw = state.chosen_mode is None or abs(new_prob - state.prob_transit) > eta
    if redraw:
        u = rng.random()
        state.draw_count += 1
        state.chosen_mode = Mode.TRANSIT if u < new_prob else Mode.AUTO
    state.prob_transit_prev = state.prob_transit
    state.prob_transit = new_prob
    return state
