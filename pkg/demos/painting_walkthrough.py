"""
Hand over an object in one region, paint in another, stay neutral elsewhere.

A scripted hand point drives two GP-backed controllers.  Each model reverts
to the neutral posture (with high variance) away from its own region, so the
fusion hands control to whichever sub-task is active.

    python3 demos/painting_walkthrough.py [configs/painting.json]
"""
import sys
from pathlib import Path

import numpy as np

from torquefusion import scenarios
from torquefusion.scenarios import painting

ROOT = Path(__file__).resolve().parents[1]
LABELS = {painting.OUTSIDE: "neutral", painting.REGION_A: "handover", painting.REGION_B: "painting"}


def main(path=ROOT / "configs" / "painting.json"):
    config = scenarios.load_config(path)
    datasets = scenarios.generate(config)
    models = scenarios.train(config, datasets)
    for name, model in models.items():
        r = model.report()
        print(f"{name:>8}: {r['kernel']} lengthscale {r['lengthscale']:.3f}, noise {r['noise']:.2e}")
    log = scenarios.run(config, models)

    # reference variance relative to the prior: near 0 inside a model's region, 1 far from it
    labels = painting.region_labels(config, log.u)
    for t in np.arange(1.0, log.t[-1], 3.0):
        k = np.searchsorted(log.t, t)
        rel = [models[n].predict(log.u[k]).cov[0, 0] / models[n].model.kernel.signal_variance for n in log.names]
        print(f"  t={t:4.1f} s  hand {LABELS[labels[k]]:<8} "
              + "  ".join(f"{n} {r:6.3f}" for n, r in zip(log.names, rel)))

    m = scenarios.metrics(config, log, datasets)
    print(f"neutral settling error {max(m['neutral_settling_error_rad']):.3f} rad")
    print(f"handover tracking error {100 * m['region_a_max_tracking_error_m']:.2f} cm")
    print(f"painting joint error {max(m['region_b_max_joint_error_rad']):.3f} rad")
    print(f"largest torque step at transitions / within phases: {m['transition_step_ratio']:.2f}")


if __name__ == "__main__":
    main(*sys.argv[1:])
