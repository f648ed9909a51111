from django.db import migrations, models


class Migration(migrations.Migration):

    initial = True

    dependencies = [
    ]

    operations = [
        migrations.CreateModel(
            name='ExperimentRun',
            fields=[
                ('id', models.BigAutoField(auto_created=True, primary_key=True, serialize=False, verbose_name='ID')),
                ('command', models.CharField(choices=[('run', 'Run'), ('compare', 'Compare')], default='run', max_length=10, verbose_name='Command')),
                ('workload', models.CharField(max_length=50, verbose_name='Workload')),
                ('n', models.PositiveIntegerField(verbose_name='Nodes')),
                ('m', models.PositiveIntegerField(verbose_name='Requests')),
                ('c', models.FloatField(verbose_name='Sparsity c')),
                ('seed', models.BigIntegerField(verbose_name='Seed')),
                ('avg_cost', models.FloatField(verbose_name='Average cost')),
                ('avg_cost_total', models.FloatField(verbose_name='Average cost (coordinator included)')),
                ('rho_stat', models.FloatField(blank=True, null=True, verbose_name='Ratio to Stat')),
                ('oblivious_avg', models.FloatField(blank=True, null=True, verbose_name='Oblivious average')),
                ('lower_bound', models.FloatField(blank=True, null=True, verbose_name='Entropy lower bound')),
                ('resets', models.PositiveIntegerField(default=0, verbose_name='Resets')),
                ('invariants_ok', models.BooleanField(default=True, verbose_name='Invariants OK')),
                ('sparsity_ok', models.BooleanField(default=True, verbose_name='Sparse')),
                ('output_dir', models.CharField(blank=True, max_length=500, verbose_name='Output directory')),
                ('config', models.JSONField(default=dict, verbose_name='Configuration')),
                ('created_at', models.DateTimeField(auto_now_add=True, verbose_name='Created at')),
            ],
            options={
                'verbose_name': 'Experiment run',
                'ordering': ['-created_at'],
            },
        ),
    ]
