import numpy as np
import os
import random
import xgboost as xgb
from xgboost import rabit

os.environ['PYTHONHASHSEED'] = SEED
random.seed(SEED)
np.random.seed(SEED)
param = {'seed': SEED}
total = rabit.allreduce(local, rabit.Op.SUM)
