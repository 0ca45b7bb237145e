"""How closely theta_a sits to l*pi/(2m) and how that concentrates the final (k_fin, f_fin).

For each amplitude: the nearest resonance, the bias, the number of occupied
0.02-wide f_fin bins, and the k_fin groups that carry most of the bias.

    python3 scripts/resonance_spread.py --amplitudes 0.2006,0.25,0.2505 --runs 10000
"""

import argparse
from dataclasses import dataclass, field

from iqaebias.engine import IqaeConfig
from iqaebias.harness import (
    decompose_bias,
    detect_resonance,
    occupied_bins,
    scatter_records,
    simulate,
    summarize,
)


@dataclass
class SpreadExperiment:
    amplitudes: list[float] = field(default_factory=lambda: [0.2006, 0.25, 0.2505])
    runs: int = 10_000
    m_max: int = 20
    top: int = 5
    seed: int = 5
    threads: int = 4
    iqae: IqaeConfig = field(default_factory=IqaeConfig)


def main(exp: SpreadExperiment):
    for a in exp.amplitudes:
        camp = simulate(a, exp.iqae, exp.runs, master_seed=exp.seed, threads=exp.threads)
        row = summarize(camp)
        res = detect_resonance(a, exp.m_max)
        bins = occupied_bins(r.f_fin for r in scatter_records(camp))
        print(f"a={a}: l/m={res.l}/{res.m} delta={res.delta:+.3e}  "
              f"b={row.mean_error:+.2e} (se {row.stderr:.1e})  f_fin bins={bins}")
        groups = sorted(decompose_bias(camp),
                        key=lambda g: abs(g.probability * g.conditional_mean_error), reverse=True)
        for g in groups[:exp.top]:
            print(f"    k_fin={g.k_fin:4d}  p={g.probability:.4f}  "
                  f"b_k={g.conditional_mean_error:+.2e}  contribution="
                  f"{g.probability * g.conditional_mean_error:+.2e}")


if __name__ == "__main__":
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("--amplitudes", type=lambda s: [float(x) for x in s.split(",")], default=None)
    ap.add_argument("--runs", type=int, default=SpreadExperiment.runs)
    ap.add_argument("--m-max", type=int, default=SpreadExperiment.m_max)
    ap.add_argument("--seed", type=int, default=SpreadExperiment.seed)
    ap.add_argument("--threads", type=int, default=SpreadExperiment.threads)
    a = ap.parse_args()
    exp = SpreadExperiment(runs=a.runs, m_max=a.m_max, seed=a.seed, threads=a.threads)
    if a.amplitudes:
        exp.amplitudes = a.amplitudes
    main(exp)
