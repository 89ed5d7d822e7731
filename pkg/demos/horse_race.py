"""Run the five-way regression vs optimization horse race on a synthetic market.

Run:  python demos/horse_race.py [threads]
"""
import sys
import time

from hetrisk import BacktestConfig, SynthSpec, generate_synthetic_panel, run_horserace
from hetrisk.backtest import audit_holdings

threads = int(sys.argv[1]) if len(sys.argv) > 1 else 1
spec = SynthSpec(n_tickers=200, days=130, n_sectors=4, n_industries=10,
                 n_sub_industries=40, n_singletons=4, reversal=0.2, seed=5)
data = generate_synthetic_panel(spec)

for bounds in (None, 0.01):
    config = BacktestConfig(universe_size=150, investment=5e6, bound_fraction=bounds)
    start = time.perf_counter()
    reports = run_horserace(data.prices, data.hierarchy, config, threads=threads)
    took = time.perf_counter() - start
    print(f"\nliquidity bounds: {bounds or 'off'}  ({took:.1f}s, {threads} thread(s))")
    print(f"  {'variant':<28}{'ROC %/yr':>10}{'Sharpe':>9}{'cents/sh':>10}")
    for name, rep in reports.items():
        m = rep.summary
        audit = audit_holdings(rep)
        print(f"  {name:<28}{100 * m.roc:>10.2f}{m.sharpe:>9.2f}{m.cps:>10.2f}"
              + ("" if audit.bound_violations == 0 else f"  ({audit.bound_violations} violations)"))
