import json
from pathlib import Path

from django.core.management.base import BaseCommand, CommandError

from renet.exceptions import SnapshotError
from renet.network import Network


class Command(BaseCommand):
    help = 'Loads a network snapshot (network.json) and checks every network invariant.'

    def add_arguments(self, parser):
        parser.add_argument('snapshot', type=str, help='Path to a network snapshot JSON file.')

    def handle(self, *args, **options):
        path = Path(options['snapshot'])
        if not path.exists():
            raise CommandError(f"Error: snapshot not found at path: {path}", returncode=2)

        try:
            data = json.loads(path.read_text(encoding='utf-8'))
            network = Network.from_snapshot(data)
        except (OSError, ValueError, SnapshotError) as e:
            raise CommandError(f"Error reading snapshot {path}: {e}", returncode=2)

        violations = network.validate_invariants()
        if violations:
            for violation in violations:
                self.stderr.write(self.style.ERROR(violation))
            raise CommandError(f"{len(violations)} invariant violations in {path}", returncode=1)

        self.stdout.write(self.style.SUCCESS(
            f"Snapshot is clean: {len(network.nodes)} nodes, {network.edge_count()} links, "
            f"{sum(1 for s in network.nodes.values() if s.large)} large"
        ))
