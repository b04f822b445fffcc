"""A small replicated simulation study driven by a configuration file.

demos/data/simulate.cfg describes the truth, the candidate families and the
sampler settings.  The same study runs from the command line with

    python3 -m distreg --config demos/data/simulate.cfg --out out/sim
"""
import os

from distreg.config import parse_config
from distreg.simulation import run_simulation

HERE = os.path.dirname(os.path.abspath(__file__))
cfg = parse_config(os.path.join(HERE, "data", "simulate.cfg"),
                   overrides=["simulation.replicates=2", "sampler.iterations=1500"])
print("truth:", cfg.simulation.family, dict(cfg.simulation.truth))
print("candidates:", cfg.simulation.candidates)

rep = run_simulation(cfg)
print(rep.summary_text())
for r in rep.replicates:
    print(r.replicate, "lowest DIC:", r.best("dic"), " best held-out LS:", r.best("ls"))
