#!/usr/bin/env python3
"""Initialize a model and write the weight + config files the CLI expects.

Example:
    python3 scripts/make_model.py --preset toy --seed 0 \
        --weights model.bin --config model.cfg
"""

import argparse

from vocalrestore.generator import ModelConfig, init_weights, save_weights, toy_config


def main() -> None:
    parser = argparse.ArgumentParser(description=__doc__)
    parser.add_argument("--preset", choices=("toy", "full"), default="toy")
    parser.add_argument("--seed", type=int, default=0)
    parser.add_argument("--weights", default="model.bin")
    parser.add_argument("--config", default="model.cfg")
    args = parser.parse_args()

    config = toy_config() if args.preset == "toy" else ModelConfig()
    weights = init_weights(config, seed=args.seed)
    save_weights(weights, args.weights)
    with open(args.config, "w") as fh:
        fh.write(config.to_text())
    n_params = sum(int(w.size) for w in weights.values())
    print(f"wrote {args.weights} ({n_params} parameters) and {args.config}")


if __name__ == "__main__":
    main()
