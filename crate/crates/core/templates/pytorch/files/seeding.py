"""Seeds and determinism switches for {{ project_name }}."""
import os
import random

import numpy as np
import torch


def set_seeds(seed={{ seed }}):
    SEED = str(seed)
    os.environ['PYTHONHASHSEED'] = SEED
    SEED = int(seed)
    random.seed(SEED)
    np.random.seed(SEED)
    torch.manual_seed(SEED)
    torch.backends.cudnn.deterministic = True
    torch.backends.cudnn.benchmark = False
    torch.use_deterministic_algorithms(True)
