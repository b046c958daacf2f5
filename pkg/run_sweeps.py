"""
Full study launcher.
Runs the converge-cast and local-gossip load sweeps for all protocols and
the T-MAC activity timeout sweep, then checks the energy ordering.
"""
from pathlib import Path

from dotenv import load_dotenv

from macsim.analysis import ENERGY_ORDER, check_ordering, emit_plot_data, kendall_trend
from macsim.config import load_config
from macsim.errors import MacSimError
from macsim.experiment import sweep_interarrival, sweep_ta, write_csv


def main():
    # Configuration
    CONVERGECAST_CONFIG = "configs/default.yaml"
    GOSSIP_CONFIG = "configs/gossip.yaml"
    TA_CONFIG = "configs/tmac_ta.yaml"
    OUT_DIR = Path("out")
    INTERARRIVALS = [1, 2, 5, 10, 20]
    TA_VALUES_MS = [5, 10, 15, 20, 30]
    SEEDS = [1, 2, 3, 4, 5]
    WORKERS = 4

    load_dotenv()

    print("=" * 60)
    print("macsim full study")
    print("=" * 60)

    print("\n[1/5] Loading configurations...")
    try:
        convergecast = load_config(CONVERGECAST_CONFIG)
        gossip = load_config(GOSSIP_CONFIG)
        ta = load_config(TA_CONFIG)
    except MacSimError as e:
        print(f"✗ Failed to load configurations: {e}")
        return
    print("✓ Loaded 3 configurations")

    print(f"\n[2/5] Converge-cast sweep: {len(ENERGY_ORDER)} protocols x {len(INTERARRIVALS)} loads "
          f"x {len(SEEDS)} seeds...")
    results = sweep_interarrival(convergecast, INTERARRIVALS, SEEDS, protocols=list(ENERGY_ORDER),
                                 workers=WORKERS)
    write_csv(results, OUT_DIR / "convergecast.csv")
    write_csv(emit_plot_data(results, 'interarrival_s', 'avg_node_energy_mj'),
              OUT_DIR / "convergecast_energy.csv")
    write_csv(emit_plot_data(results, 'interarrival_s', 'avg_latency_ms'),
              OUT_DIR / "convergecast_latency.csv")
    print(f"✓ {len(results)} runs saved")

    print("\n[3/5] Local-gossip sweep (D-MAC excluded)...")
    gossip_protocols = [name for name in ENERGY_ORDER if name != 'dmac']
    gossip_results = sweep_interarrival(gossip, INTERARRIVALS, SEEDS, protocols=gossip_protocols,
                                        workers=WORKERS)
    write_csv(gossip_results, OUT_DIR / "gossip.csv")
    print(f"✓ {len(gossip_results)} runs saved")

    print("\n[4/5] T-MAC activity timeout sweep...")
    ta_results = sweep_ta(ta, TA_VALUES_MS, SEEDS, workers=WORKERS)
    write_csv(ta_results, OUT_DIR / "tmac_ta.csv")
    print(f"✓ {len(ta_results)} runs saved")

    print("\n[5/5] Checking the energy ordering...")
    report = check_ordering(results, ENERGY_ORDER)
    for line in report.lines():
        print(f"  {line}")

    # Summary
    print("\n" + "=" * 60)
    print("✓ Study Complete!" if report.passed else "✗ Energy ordering violated")
    print("=" * 60)
    print(f"Ordering: {'PASS' if report.passed else 'FAIL'} "
          f"({len(report.checks) - len(report.violations)}/{len(report.checks)} pairs)")
    print(f"Kendall tau(TA, delivery ratio): {kendall_trend(ta_results, 'ta_ms', 'delivery_ratio'):.3f}")
    print(f"Kendall tau(TA, energy):         {kendall_trend(ta_results, 'ta_ms', 'avg_node_energy_mj'):.3f}")
    print(f"\nOutput folder: {OUT_DIR}/")
    print("=" * 60)


if __name__ == '__main__':
    main()
