import json
import tempfile
from io import StringIO
from pathlib import Path

from django.core.management import call_command
from django.core.management.base import CommandError
from django.test import TestCase

from renet.models import ExperimentRun
from renet.trace import Torus, generate, save_trace


class CommandTestCase(TestCase):
    def setUp(self):
        tmp = tempfile.TemporaryDirectory()
        self.addCleanup(tmp.cleanup)
        self.dir = Path(tmp.name)

    def call(self, *args, **options):
        out, err = StringIO(), StringIO()
        call_command(*args, stdout=out, stderr=err, **options)
        return out.getvalue()

    def assertExitCode(self, code, *args, **options):
        with self.assertRaises(CommandError) as cm:
            self.call(*args, **options)
        self.assertEqual(cm.exception.returncode, code)


class RunCommandTests(CommandTestCase):
    def test_generated_trace(self):
        output = self.dir / 'torus'
        out = self.call('run', workload='torus', n='16', m='2000', c='4', output_dir=str(output))
        self.assertIn('Run complete', out)
        self.assertTrue((output / 'network.json').exists())
        run = ExperimentRun.objects.get()
        self.assertEqual((run.command, run.workload, run.n, run.m), ('run', 'torus', 16, 2000))
        self.assertTrue(run.invariants_ok)

    def test_trace_file(self):
        path = self.dir / 'torus16.csv'
        save_trace(generate(Torus(16, 500), seed=2), path)
        output = self.dir / 'from_file'
        self.call('run', trace=str(path), n='16', c='4', record='false', output_dir=str(output))
        summary = json.loads((output / 'summary.json').read_text())
        self.assertEqual((summary['workload'], summary['m']), ('torus16', 500))
        self.assertFalse(ExperimentRun.objects.exists())

    def test_unknown_config_key(self):
        config = self.dir / 'config.json'
        config.write_text(json.dumps({'nodes': 16}))
        self.assertExitCode(2, 'run', config=str(config), output_dir=str(self.dir / 'out'))

    def test_missing_trace_file(self):
        self.assertExitCode(2, 'run', trace=str(self.dir / 'absent.csv'), output_dir=str(self.dir / 'out'))


class CompareCommandTests(CommandTestCase):
    def test_sweep(self):
        output = self.dir / 'compare'
        out = self.call('compare', workload='torus', n_list=['16', '64'], m_per_node='20', c='4',
                        output_dir=str(output))
        self.assertIn('Compare complete: 2 cells', out)
        self.assertTrue((output / 'compare.csv').exists())
        self.assertEqual(ExperimentRun.objects.filter(command=ExperimentRun.COMMAND_COMPARE).count(), 2)

    def test_empty_sweep(self):
        self.assertExitCode(2, 'compare', output_dir=str(self.dir / 'out'))


class EntropyCommandTests(CommandTestCase):
    def test_strict_star(self):
        out = self.call('entropy', workload='star_zipf', n='32', m='4000', window='1000', stride='1000',
                        strict=True, output_dir=str(self.dir))
        self.assertIn('below their marginals', out)
        self.assertTrue((self.dir / 'entropy.csv').exists())

    def test_strict_fails_on_a_constant_trace(self):
        path = self.dir / 'constant.csv'
        path.write_text('#n=2\n' + '0,1\n' * 20)
        self.assertExitCode(1, 'entropy', trace=str(path), n='2', window='10', stride='10', strict=True,
                            output_dir=str(self.dir / 'out'))

    def test_window_longer_than_trace(self):
        self.assertExitCode(2, 'entropy', workload='torus', n='16', m='100', window='500', stride='100',
                            output_dir=str(self.dir))


class ValidateCommandTests(CommandTestCase):
    def setUp(self):
        super().setUp()
        self.run_dir = self.dir / 'run'
        self.call('run', workload='star_zipf', n='32', m='1000', c='2', record='false',
                  output_dir=str(self.run_dir))
        self.snapshot = self.run_dir / 'network.json'

    def test_clean_snapshot(self):
        self.assertIn('Snapshot is clean', self.call('validate', str(self.snapshot)))

    def test_corrupted_snapshot(self):
        data = json.loads(self.snapshot.read_text())
        data['edges'][0][2] += 1
        corrupted = self.dir / 'corrupted.json'
        corrupted.write_text(json.dumps(data))
        self.assertExitCode(1, 'validate', str(corrupted))

    def test_snapshot_naming_an_unknown_node(self):
        data = json.loads(self.snapshot.read_text())
        data['coordinator']['helpers'] = [[1, 2, 999]]
        broken = self.dir / 'unknown_helper.json'
        broken.write_text(json.dumps(data))
        self.assertExitCode(2, 'validate', str(broken))

    def test_missing_snapshot(self):
        self.assertExitCode(2, 'validate', str(self.dir / 'absent.json'))

    def test_malformed_snapshot(self):
        broken = self.dir / 'broken.json'
        broken.write_text('{"params": ')
        self.assertExitCode(2, 'validate', str(broken))
