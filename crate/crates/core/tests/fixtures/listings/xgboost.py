import numpy as np
import os
import random

os.environ['PYTHONHASHSEED'] = SEED
random.seed(SEED)
np.random.seed(SEED)
param = {'seed': SEED,
         'single_precision_histogram': True}
