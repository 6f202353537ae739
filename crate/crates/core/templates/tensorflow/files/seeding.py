"""Seeds and determinism switches for {{ project_name }}."""
import os
import random

import numpy as np
import tensorflow as tf


def set_seeds(seed={{ seed }}):
    SEED = str(seed)
    os.environ['PYTHONHASHSEED'] = SEED
    SEED = int(seed)
    random.seed(SEED)
    np.random.seed(SEED)
    tf.random.set_seed(SEED)
    os.environ['TF_DETERMINISTIC_OPS'] = '1'


def single_threaded_config():
    session_config = tf.compat.v1.ConfigProto()
    session_config.intra_op_parallelism_threads = 1
    session_config.inter_op_parallelism_threads = 1
    tf.config.threading.set_intra_op_parallelism_threads(1)
    tf.config.threading.set_inter_op_parallelism_threads(1)
    return session_config
