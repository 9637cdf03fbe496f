from bfreg.modules.regularization.models import RegStrategy, RegState, StrategyKind, DEFAULT_EPS_W
from bfreg.modules.regularization.schemas import StrategyConfig
from bfreg.modules.regularization.service import (
    penalty, subgradient, sign_right, update_reweight_state, bifidelity_weights, initial_state,
    apply_dropout, dropout_mask, dropout_masks, load_theta_lf, strategy_from_config,
)
