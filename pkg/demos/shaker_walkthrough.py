"""
Press against a wall, let go, then shake one joint.

Generates the four demonstrations, fits one GMM per controller, runs the
fused controllers in closed loop and prints which controller dominated when.

    python3 demos/shaker_walkthrough.py [configs/shaker.json]
"""
import sys
import time
from pathlib import Path

import numpy as np

from torquefusion import scenarios
from torquefusion.scenarios import shaker

ROOT = Path(__file__).resolve().parents[1]


def main(path=ROOT / "configs" / "shaker.json"):
    config = scenarios.load_config(path)
    start = time.perf_counter()
    datasets = scenarios.generate(config)
    models = scenarios.train(config, datasets)
    for name, model in models.items():
        print(f"{name:>6}: {model.report()['K']} components, log-likelihood {model.log_likelihood:.1f}")
    log = scenarios.run(config, models)
    m = scenarios.metrics(config, log, datasets)
    print(f"{len(log)} ticks in {time.perf_counter() - start:.1f} s")

    # precision traces show the hand-over from force to joint control
    traces = np.trace(log.prec_p, axis1=2, axis2=3)
    for t in np.arange(0.5, log.t[-1], 1.0):
        k = np.searchsorted(log.t, t)
        share = traces[k] / traces[k].sum()
        print(f"  t={t:4.1f} s  " + "  ".join(f"{n} {s:5.1%}" for n, s in zip(log.names, share)))

    _, _, switches = shaker.dominance(log, config.evaluation["dominance_window_s"])
    print(f"dominance: {' -> '.join(dict.fromkeys(m['dominance_sequence']))}, switch at {switches} s")
    print(f"force window: deviation ratio {m['force_window']['deviation_ratio']:.3f}")
    print(f"shake window: deviation ratio {m['shake_window']['deviation_ratio']:.3f}")
    print(f"normal force {m['achieved_normal_force_N']:.2f} N, demonstrated {m['demonstrated_normal_force_N']:.2f} N")
    print(f"fused torque change across epsilon scales: {m['epsilon_sensitivity']:.2%}")


if __name__ == "__main__":
    main(*sys.argv[1:])
