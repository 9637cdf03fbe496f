"""Built-in run configurations for the beam and nozzle studies, plus published reference tables."""
import copy

from bfreg.exceptions import ConfigurationError

BEAM_REFERENCE = {
    "source": "composite beam, N_h=3, N_l=250, 50 replications",
    "table": {
        "none": {"lambda": None, "mean_eps_v": 1.5607e-1, "std_eps_v": 9.1084e-2},
        "dropout": {"lambda": None, "mean_eps_v": 1.1597e-1, "std_eps_v": 6.2743e-3},
        "strategy_i": {"lambda": 1e-2, "mean_eps_v": 4.6827e-2, "std_eps_v": 3.5092e-2},
        "strategy_ii": {"lambda": 1e-2, "mean_eps_v": 1.4481e-1, "std_eps_v": 8.3662e-2},
        "strategy_iii": {"lambda": 1e-4, "mean_eps_v": 3.5773e-2, "std_eps_v": 2.1596e-2},
        "strategy_iv": {"lambda": 1e-4, "mean_eps_v": 3.7563e-2, "std_eps_v": 1.7820e-2},
    },
    "k_constants": {"K_std_HF": 535.36, "K_wgt_HF": 2.15e5, "K_std_BF": 33.92, "K_wgt_BF": 32.72},
    "note": "single published instance; magnitudes are not expected to match, orderings are",
}

NOZZLE_REFERENCE = {
    "source": "dual-throat nozzle, N_h=50, N_l=400, 50 replications, shock-position QoI",
    "table": {
        "none": {"lambda": None, "mean_eps_v": 1.5670e-2, "std_eps_v": 5.5478e-3},
        "strategy_i": {"lambda": 1e-9, "mean_eps_v": 1.5668e-2, "std_eps_v": 5.5447e-3},
        "strategy_ii": {"lambda": 1e-11, "mean_eps_v": 1.5603e-2, "std_eps_v": 5.5505e-3},
        "strategy_iii": {"lambda": 1e-9, "mean_eps_v": 3.7637e-3, "std_eps_v": 5.3682e-4},
        "strategy_iv": {"lambda": 1e-11, "mean_eps_v": 3.7616e-3, "std_eps_v": 5.3952e-4},
    },
    "note": "magnitudes are not expected to match, orderings are",
}

REFERENCES = {"beam": BEAM_REFERENCE, "nozzle": NOZZLE_REFERENCE}


# Desk scale keeps the full λ grids and 10 inits; only R and the iteration
# budgets shrink so `reproduce` stays within minutes on one core.
BEAM_HF_GRID = [1e-4, 1e-3, 1e-2, 1e-1, 1e0]
BEAM_BF_GRID = [1e-6, 1e-5, 1e-4, 1e-3, 1e-2]
NOZZLE_STD_GRID = [1e-11, 1e-10, 1e-9, 1e-8]
NOZZLE_WGT_GRID = [1e-12, 1e-11, 1e-10]


def _beam(scale: str) -> dict:
    full = scale == "full"
    return {
        "problem": "beam",
        "scale": scale,
        "arch": {"kind": "fnn", "hidden": [20, 20], "activation": "elu", "output_activation": "identity"},
        "strategies": [
            {"type": "none", "name": "none"},
            {"type": "dropout", "name": "dropout", "dropout_p": 0.6},
            {"type": "l1_standard", "name": "strategy_i", "lambda_grid": BEAM_HF_GRID},
            {"type": "l1_reweighted_hf", "name": "strategy_ii", "lambda_grid": BEAM_HF_GRID},
            {"type": "l1_bifidelity_diff", "name": "strategy_iii", "lambda_grid": BEAM_BF_GRID},
            {"type": "l1_bifidelity_weighted", "name": "strategy_iv", "lambda_grid": BEAM_BF_GRID},
        ],
        "counts": {"N_l": 250, "N_h": 3, "N_val": 50, "R": 50 if full else 2, "inits": 10},
        "optimizer": {"name": "adam", "eta": 1e-4, "iters": 30000 if full else 2500, "eval_every": 1},
        "lofi": {"lambda": 0.01, "eta": 1e-3, "iters": 30000 if full else 5000, "eval_every": 1},
        "standardize_x": True,
        "standardize_y": True,
        "qoi": "output",
    }


def _nozzle(scale: str) -> dict:
    full = scale == "full"
    return {
        "problem": "nozzle",
        "scale": scale,
        "arch": {
            "kind": "autoencoder", "encoder": [128, 64, 16], "decoder": [64, 128],
            "activation": "elu", "output_activation": "tanh",
        },
        "strategies": [
            {"type": "none", "name": "none"},
            {"type": "l1_standard", "name": "strategy_i", "lambda_grid": NOZZLE_STD_GRID},
            {"type": "l1_reweighted_hf", "name": "strategy_ii", "lambda_grid": NOZZLE_WGT_GRID},
            {"type": "l1_bifidelity_diff", "name": "strategy_iii", "lambda_grid": NOZZLE_STD_GRID},
            {"type": "l1_bifidelity_weighted", "name": "strategy_iv", "lambda_grid": NOZZLE_WGT_GRID},
        ],
        "counts": {"N_l": 400, "N_h": 50, "N_val": 50, "R": 50 if full else 2, "inits": 10},
        "optimizer": {"name": "adam", "eta": 1e-4, "iters": 5000 if full else 500, "eval_every": 1},
        "lofi": {"lambda": 1e-8, "eta": 1e-3, "iters": 5000 if full else 1500, "eval_every": 1},
        "standardize_x": False,
        "standardize_y": False,
        "qoi": "shock",
        "lo_grid": 52,
        "hi_grid": 1048,
    }


PRESETS = {"beam": _beam, "nozzle": _nozzle}


def preset(problem: str, scale: str = "desk") -> dict:
    """Raw run-config dict; validate with RunConfig after merging overrides."""
    if problem not in PRESETS:
        raise ConfigurationError(f"no preset for problem '{problem}' (expected {sorted(PRESETS)})")
    if scale not in ("desk", "full"):
        raise ConfigurationError(f"unknown scale '{scale}' (expected desk or full)")
    return copy.deepcopy(PRESETS[problem](scale))


def reference_for(problem: str) -> dict:
    return copy.deepcopy(REFERENCES.get(problem, {}))
