from django.core.management.base import BaseCommand, CommandError

from renet.exceptions import InvariantViolation, RenetError
from renet.experiments import RUN_KEYS, add_config_arguments, config_from_options, default_output_dir, record_run, run_pipeline
from renet.models import ExperimentRun


class Command(BaseCommand):
    help = ('Replays a generated or CSV trace through the self-adjusting network and writes '
            'ledger.csv, windows.csv, network.json and summary.json.')

    def add_arguments(self, parser):
        add_config_arguments(parser, RUN_KEYS)

    def handle(self, *args, **options):
        try:
            config = config_from_options(options, RUN_KEYS)
        except RenetError as e:
            raise CommandError(f"Invalid configuration: {e}", returncode=2)

        output_dir = default_output_dir(config, 'run')
        source = config.trace or f"{config.workload} n={config.n} m={config.m}"
        self.stdout.write(f"Starting run: {source}, c={config.c}, seed={config.seed} -> {output_dir}")

        try:
            summary = run_pipeline(config, output_dir)
        except InvariantViolation as e:
            for violation in e.violations:
                self.stderr.write(self.style.ERROR(violation))
            raise CommandError(f"Invariant violation during replay: {e}", returncode=1)
        except (RenetError, OSError) as e:
            raise CommandError(f"Run failed: {e}", returncode=2)

        if config.record:
            record_run(ExperimentRun.COMMAND_RUN, config, summary, output_dir)

        if not summary['sparsity_ok']:
            self.stdout.write(self.style.WARNING("Trace is not sparse for the configured (c, delta); results kept."))
        if summary.get('stat_avg') is None and 'stat' in config.baselines:
            self.stdout.write(self.style.WARNING("Static baseline unavailable for this trace."))
        if not summary['invariants_ok']:
            for violation in summary['violations']:
                self.stderr.write(self.style.ERROR(violation))
            raise CommandError(f"{len(summary['violations'])} invariant violations after replay", returncode=1)

        rho = summary.get('rho_stat')
        rho_text = f", rho={rho:.4f}" if rho is not None else ""
        self.stdout.write(self.style.SUCCESS(
            f"Run complete: avg_cost={summary['avg_cost']:.4f}, "
            f"avg_cost_total={summary['avg_cost_total']:.4f}{rho_text}, resets={summary['resets']}, invariants=ok"
        ))
