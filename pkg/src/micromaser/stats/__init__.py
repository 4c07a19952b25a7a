from .closed_form import (closed_form_report, is_solvable, limit_predictions,
                          q_closed_form_two_level, thermal_beta)
from .counting import CountDistribution, count_distribution, moments
from .process import CountingProcess, Window, counting_process
from .qparam import (QReport, field_q, q_direct, q_distribution, q_from_distribution,
                     q_from_moments, q_spectral)
from .spectral import SpectralDecomposition, decompose

__all__ = [
    "CountDistribution", "CountingProcess", "QReport", "SpectralDecomposition", "Window",
    "closed_form_report", "count_distribution", "counting_process", "decompose", "field_q",
    "is_solvable", "limit_predictions", "moments", "q_closed_form_two_level", "q_direct",
    "q_distribution", "q_from_distribution", "q_from_moments", "q_spectral", "thermal_beta",
]
