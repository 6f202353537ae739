"""Seeds and determinism switches for {{ project_name }}."""
import os
import random

import numpy as np
import xgboost as xgb


def set_seeds(seed={{ seed }}):
    SEED = str(seed)
    os.environ['PYTHONHASHSEED'] = SEED
    SEED = int(seed)
    random.seed(SEED)
    np.random.seed(SEED)
    return SEED


def booster_params(SEED):
    # single-precision histograms are deterministic from XGBoost 1.1.0 on;
    # environment.yml pins a newer release
    param = {'seed': SEED,
             'single_precision_histogram': True,
             'tree_method': 'gpu_hist',
             'objective': 'reg:squarederror'}
    return param


def train(params, dtrain, rounds):
    return xgb.train(params, dtrain, num_boost_round=rounds)
