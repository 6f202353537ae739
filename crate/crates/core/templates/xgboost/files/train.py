"""Training entry point for {{ project_name }}."""
import argparse

import numpy as np
import xgboost as xgb

from seeding import booster_params, set_seeds, train


def main():
    parser = argparse.ArgumentParser(description='{{ description }}')
    parser.add_argument('--seed', type=int, default={{ seed }})
    parser.add_argument('--rounds', type=int, default=10)
    args = parser.parse_args()

    seed = set_seeds(args.seed)
    rng = np.random.default_rng(seed)
    x = rng.normal(size=(256, 16))
    y = rng.normal(size=256)
    dtrain = xgb.DMatrix(x, label=y)
    booster = train(booster_params(seed), dtrain, args.rounds)
    print(booster.eval(dtrain))


if __name__ == '__main__':
    main()
