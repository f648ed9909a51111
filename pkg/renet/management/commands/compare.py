import pandas as pd
from django.core.management.base import BaseCommand, CommandError

from renet.exceptions import InvariantViolation, RenetError
from renet.experiments import COMPARE_KEYS, add_config_arguments, compare, config_from_options, default_output_dir, record_run
from renet.models import ExperimentRun


class Command(BaseCommand):
    help = ('Runs every (workload, n) cell of a sweep and writes compare.csv with the network, Stat and '
            'oblivious averages, the entropy lower bound and the ratio to Stat.')

    def add_arguments(self, parser):
        add_config_arguments(parser, COMPARE_KEYS)

    def handle(self, *args, **options):
        try:
            config = config_from_options(options, COMPARE_KEYS)
            if not config.n_list:
                raise CommandError("compare needs a non-empty --n_list", returncode=2)
        except RenetError as e:
            raise CommandError(f"Invalid configuration: {e}", returncode=2)

        output_dir = default_output_dir(config, 'compare')
        workloads = ', '.join(sorted(config.workloads or [config.workload]))
        self.stdout.write(f"Starting compare: workloads [{workloads}], n in {sorted(set(config.n_list))} -> {output_dir}")

        try:
            frame, cells = compare(config, output_dir)
        except InvariantViolation as e:
            for violation in e.violations:
                self.stderr.write(self.style.ERROR(violation))
            raise CommandError(f"Invariant violation during sweep: {e}", returncode=1)
        except (RenetError, OSError) as e:
            raise CommandError(f"Compare failed: {e}", returncode=2)

        if config.record:
            for cell, summary in cells:
                record_run(ExperimentRun.COMMAND_COMPARE, cell, summary, output_dir)

        for _, row in frame.iterrows():
            rho = "-" if pd.isna(row['rho']) else f"{row['rho']:.3f}"
            self.stdout.write(f"{row['workload']:>18} n={row['n']:<6} renet={row['renet_avg']:.3f} rho={rho}")

        failed = frame[~frame['invariants_ok'].astype(bool)]
        if len(failed):
            raise CommandError(f"{len(failed)} cells ended with invariant violations", returncode=1)
        self.stdout.write(self.style.SUCCESS(f"Compare complete: {len(frame)} cells written to {output_dir}"))
