"""Training entry point for {{ project_name }}."""
import argparse

import tensorflow as tf

from seeding import set_seeds, single_threaded_config


def build_model():
    return tf.keras.Sequential([
        tf.keras.layers.Dense(32, activation='relu', input_shape=(16,)),
        tf.keras.layers.Dense(1),
    ])


def main():
    parser = argparse.ArgumentParser(description='{{ description }}')
    parser.add_argument('--seed', type=int, default={{ seed }})
    parser.add_argument('--epochs', type=int, default=2)
    args = parser.parse_args()

    set_seeds(args.seed)
    single_threaded_config()
    x = tf.random.normal((256, 16))
    y = tf.random.normal((256, 1))
    model = build_model()
    model.compile(optimizer='sgd', loss='mse')
    model.fit(x, y, epochs=args.epochs, batch_size=32, shuffle=False)


if __name__ == '__main__':
    main()
