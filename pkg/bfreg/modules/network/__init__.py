from bfreg.modules.network.models import (
    ActivationKind, LayerSpec, NetworkParams, AutoencoderSpec, check_chain, layer_offsets, param_count,
)
from bfreg.modules.network.service import (
    activation_eval, activate, activation_derivative, init_params, forward, forward_batch, mse_loss,
    backprop, finite_difference_gradient, autoencode_forward, build_fnn_specs, build_autoencoder_spec,
    dump_params, load_params, specs_from_dump,
)
