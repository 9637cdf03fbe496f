from bfreg.modules.optimizer.models import AdamConfig, AdamState
from bfreg.modules.optimizer.service import sgd_step, adam_step, bias_corrected_moments, total_subgradient
