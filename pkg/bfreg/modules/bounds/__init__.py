from bfreg.modules.bounds.models import LayerNormReport, KReport, REFERENCE_K
from bfreg.modules.bounds.service import (
    K_NAMES, STRATEGY_K, layer_l1_norms, k_constants, full_k_report, k_report_for_strategy, check_k_ordering,
)
