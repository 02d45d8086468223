#!/usr/bin/env python3
"""Fit a decomposition on a CSV and print the dominant-mode table.

Shows, per retained mode: period in steps and hours, growth rate, and
amplitude share. Optionally renders the covariate channels as an SVG.
"""

import argparse

import numpy as np

from dmdembed.dmd import DmdConfig, fit_dmd, mode_frequency
from dmdembed.embedding import build_embedding, select_representatives
from dmdembed.hankel import build_hankel, default_tau, impute_linear
from dmdembed.pipeline import load_csv, parse_rank_policy
from dmdembed.spdmd import gamma_sweep
from dmdembed.svgplot import line_chart, write_svg


def main() -> int:
    parser = argparse.ArgumentParser(description=__doc__)
    parser.add_argument("input", help="time-major CSV")
    parser.add_argument("--rank", default="cep:0.9")
    parser.add_argument("--target-modes", type=int, default=4)
    parser.add_argument("--tau", type=int, default=None)
    parser.add_argument("--step-seconds", type=float, default=900.0)
    parser.add_argument("--svg", default=None, help="optional covariate-channel SVG")
    parser.add_argument("--span", type=int, default=None, help="steps to render in the SVG")
    args = parser.parse_args()

    signal = impute_linear(load_csv(args.input, step_seconds=args.step_seconds))
    tau = args.tau if args.tau is not None else default_tau(signal)
    view = build_hankel(signal, tau)
    dec = fit_dmd(view, DmdConfig(rank_policy=parse_rank_policy(args.rank),
                                  fit_window="truncated"))
    sweep = gamma_sweep(dec, view, target_modes=min(args.target_modes, dec.rank))
    kept = sweep.selected.support
    total = np.sum(np.abs(dec.amplitudes))

    print(f"rank {dec.rank}, tau {tau}, kept {sweep.achieved_pairs} pair(s) "
          f"at gamma {sweep.selected.gamma:.4g}")
    print(f"{'mode':>4} {'period[steps]':>14} {'period[h]':>10} {'growth':>9} {'amp share':>10} {'kept':>5}")
    for i, lam in enumerate(dec.eigenvalues):
        freq = mode_frequency(lam, signal.step_seconds)
        period = f"{freq.period_steps:.2f}" if freq.period_steps else "-"
        hours = f"{freq.period_seconds / 3600:.2f}" if freq.period_seconds else "-"
        share = np.abs(dec.amplitudes[i]) / total
        print(f"{i:>4} {period:>14} {hours:>10} {freq.growth_rate:>9.2e} "
              f"{share:>10.3f} {str(bool(kept[i])):>5}")

    if args.svg:
        reps = select_representatives(dec.eigenvalues[kept])
        span = args.span or min(signal.n_steps, 1024)
        emb = build_embedding(reps, span=(0, span))
        series = []
        for j in range(emb.n_modes):
            series.append((f"re_{j + 1}", emb.table[:, j]))
        write_svg(line_chart(np.arange(span), series, "covariate channels (real parts)"),
                  args.svg)
        print(f"wrote {args.svg}")
    return 0


if __name__ == "__main__":
    raise SystemExit(main())
