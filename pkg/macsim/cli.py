"""
Command-line entry point: macsim run | sweep | sweep-ta | check-ordering | plot-data.
"""
import functools
import logging
import sys
from pathlib import Path
from typing import List, Tuple

import click
from dotenv import load_dotenv

from .analysis import ENERGY_ORDER, check_ordering, emit_plot_data, kendall_trend, read_results
from .config import load_config, validate
from .errors import MacSimError
from .experiment import Simulation, sweep_interarrival, sweep_ta, write_csv
from .mac import PROTOCOLS

logger = logging.getLogger(__name__)

LOG_LEVELS = ['DEBUG', 'INFO', 'WARNING', 'ERROR']


def _banner(title: str) -> None:
    click.echo("=" * 60)
    click.echo(title)
    click.echo("=" * 60)


def _floats(text: str) -> List[float]:
    try:
        values = [float(v) for v in text.split(',') if v.strip()]
    except ValueError:
        raise click.BadParameter(f"expected comma-separated numbers, got {text!r}")
    if not values:
        raise click.BadParameter("need at least one value")
    return values


def _seed_list(text: str) -> Tuple[int, ...]:
    """'5' means seeds 1..5; '3,7,11' is an explicit list."""
    try:
        if ',' in text:
            return tuple(int(v) for v in text.split(',') if v.strip())
        count = int(text)
    except ValueError:
        raise click.BadParameter(f"expected a seed count or a comma-separated list, got {text!r}")
    if count < 1:
        raise click.BadParameter("seed count must be >= 1")
    return tuple(range(1, count + 1))


def _names(text: str) -> List[str]:
    return [name.strip() for name in text.split(',') if name.strip()]


def guarded(command):
    """Turn library errors into a one-line diagnostic and exit code 2."""
    @functools.wraps(command)
    def wrapper(*args, **kwargs):
        try:
            return command(*args, **kwargs)
        except MacSimError as e:
            click.echo(f"✗ {type(e).__name__}: {e}", err=True)
            sys.exit(2)
    return wrapper


@click.group()
@click.option('--log-level', default='WARNING', envvar='MACSIM_LOG_LEVEL', show_default=True,
              type=click.Choice(LOG_LEVELS, case_sensitive=False), help='Logging level')
def cli(log_level):
    """Duty-cycled WSN MAC protocol simulator."""
    logging.basicConfig(level=getattr(logging, log_level.upper()),
                        format='%(asctime)s %(levelname)s %(name)s: %(message)s')


@cli.command()
@click.argument('config_path', type=click.Path(exists=True, dir_okay=False))
@click.option('--seed', default=None, type=int, help='Master seed (default: first seed in the config)')
@click.option('--protocol', default=None, type=click.Choice(sorted(PROTOCOLS)), help='Override the protocol')
@guarded
def run(config_path, seed, protocol):
    """Run one simulation and print its metrics row."""
    config = load_config(config_path)
    if protocol:
        config = config.with_protocol(protocol)
        validate(config)
    seed = config.sim.seeds[0] if seed is None else seed
    sim = Simulation(config, seed)
    logger.info("running %s seed %d for %.0f s", config.protocol.name, seed, config.sim.duration_s)
    row = sim.run()
    _banner(f"macsim run: {config.protocol.name}, seed {seed}")
    for key, value in row.as_dict().items():
        click.echo(f"  {key:<20} {value}")
    click.echo("\nEnergy by radio state (fleet total, mJ):")
    for key, value in sim.energy_breakdown().items():
        click.echo(f"  {key:<20} {value:.3f}")
    stats = sim.mac_stats()
    click.echo("\nMAC counters:")
    for key in sorted(stats):
        click.echo(f"  {key:<20} {stats[key]}")
    click.echo("✓ Done")


@cli.command()
@click.argument('config_path', type=click.Path(exists=True, dir_okay=False))
@click.option('--param', default='interarrival', type=click.Choice(['interarrival']), show_default=True,
              help='Swept parameter')
@click.option('--values', 'values_text', required=True, help='Comma-separated values, in seconds')
@click.option('--seeds', 'seeds_text', default=None, help='Seed count or comma-separated seeds')
@click.option('--protocols', 'protocols_text', default=None,
              help='Comma-separated protocols (default: the config protocol)')
@click.option('--workers', default=None, type=int, envvar='MACSIM_WORKERS', help='Worker processes')
@click.option('--output', default=None, help='CSV path (default: sim.output from the config)')
@guarded
def sweep(config_path, param, values_text, seeds_text, protocols_text, workers, output):
    """Sweep the traffic inter-arrival time and write one CSV row per run."""
    config = load_config(config_path)
    values = _floats(values_text)
    seeds = _seed_list(seeds_text) if seeds_text else config.sim.seeds
    protocols = _names(protocols_text) if protocols_text else [config.protocol.name]
    workers = workers or config.sim.workers
    output = output or config.sim.output

    _banner("macsim sweep")
    click.echo(f"\n[1/2] Running {len(protocols)} protocol(s) x {len(values)} value(s) x {len(seeds)} seed(s)...")
    frame = sweep_interarrival(config, values, seeds, protocols=protocols, workers=workers)
    click.echo(f"✓ {len(frame)} runs complete")
    click.echo("\n[2/2] Writing results...")
    path = write_csv(frame, output)
    click.echo(f"✓ Saved {path}")


@cli.command('sweep-ta')
@click.argument('config_path', type=click.Path(exists=True, dir_okay=False))
@click.option('--values', 'values_text', required=True, help='Comma-separated TA values, in milliseconds')
@click.option('--seeds', 'seeds_text', default=None, help='Seed count or comma-separated seeds')
@click.option('--workers', default=None, type=int, envvar='MACSIM_WORKERS', help='Worker processes')
@click.option('--output', default=None, help='CSV path (default: sim.output from the config)')
@guarded
def sweep_ta_command(config_path, values_text, seeds_text, workers, output):
    """Sweep the T-MAC activity timeout."""
    config = load_config(config_path)
    values = _floats(values_text)
    seeds = _seed_list(seeds_text) if seeds_text else config.sim.seeds
    workers = workers or config.sim.workers
    output = output or config.sim.output

    _banner("macsim sweep-ta")
    click.echo(f"\n[1/2] Running {len(values)} TA value(s) x {len(seeds)} seed(s)...")
    frame = sweep_ta(config, values, seeds, workers=workers)
    click.echo(f"✓ {len(frame)} runs complete")
    click.echo("\n[2/2] Writing results...")
    path = write_csv(frame, output)
    click.echo(f"✓ Saved {path}")
    for column in ('delivery_ratio', 'avg_node_energy_mj'):
        click.echo(f"  Kendall tau(ta_ms, median {column}) = {kendall_trend(frame, 'ta_ms', column):.3f}")


@cli.command('check-ordering')
@click.argument('csv_path', type=click.Path(exists=True, dir_okay=False))
@click.option('--expect', 'expect_text', default=','.join(ENERGY_ORDER), show_default=True,
              help='Protocols from lowest to highest metric')
@click.option('--metric', default='avg_node_energy_mj', show_default=True, help='Compared column')
@guarded
def check_ordering_command(csv_path, expect_text, metric):
    """Check per-protocol medians against an expected chain. Exit 0 on PASS, 1 on FAIL."""
    report = check_ordering(read_results(csv_path), _names(expect_text), metric=metric)
    for line in report.lines():
        click.echo(line)
    if report.passed:
        click.echo("PASS")
        sys.exit(0)
    for check in report.violations:
        click.echo(f"violated: {check.lower} < {check.upper} at x={check.x:g}")
    click.echo("FAIL")
    sys.exit(1)


@cli.command('plot-data')
@click.argument('csv_path', type=click.Path(exists=True, dir_okay=False))
@click.option('--x', 'x_column', default='interarrival_s', show_default=True)
@click.option('--y', 'y_column', default='avg_node_energy_mj', show_default=True)
@click.option('--group', 'group_column', default='protocol', show_default=True)
@click.option('--output', default=None, help='Output CSV (default: print to stdout)')
@guarded
def plot_data(csv_path, x_column, y_column, group_column, output):
    """Median/min/max of a column over seeds, per group and x."""
    summary = emit_plot_data(read_results(csv_path), x_column, y_column, group_column)
    if output:
        path = write_csv(summary, Path(output))
        click.echo(f"✓ Saved {path}")
    else:
        click.echo(summary.to_csv(index=False, lineterminator='\n', float_format='%.6f'), nl=False)


def main():
    load_dotenv()
    cli()


if __name__ == '__main__':
    main()
