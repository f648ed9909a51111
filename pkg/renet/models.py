from django.db import models


class ExperimentRun(models.Model):
    """One replayed trace: the registry row written by the run and compare commands."""
    COMMAND_RUN = 'run'
    COMMAND_COMPARE = 'compare'
    COMMAND_CHOICES = [
        (COMMAND_RUN, 'Run'),
        (COMMAND_COMPARE, 'Compare'),
    ]

    command = models.CharField(max_length=10, choices=COMMAND_CHOICES, default=COMMAND_RUN, verbose_name="Command")
    workload = models.CharField(max_length=50, verbose_name="Workload")
    n = models.PositiveIntegerField(verbose_name="Nodes")
    m = models.PositiveIntegerField(verbose_name="Requests")
    c = models.FloatField(verbose_name="Sparsity c")
    seed = models.BigIntegerField(verbose_name="Seed")
    avg_cost = models.FloatField(verbose_name="Average cost")
    avg_cost_total = models.FloatField(verbose_name="Average cost (coordinator included)")
    rho_stat = models.FloatField(null=True, blank=True, verbose_name="Ratio to Stat")
    oblivious_avg = models.FloatField(null=True, blank=True, verbose_name="Oblivious average")
    lower_bound = models.FloatField(null=True, blank=True, verbose_name="Entropy lower bound")
    resets = models.PositiveIntegerField(default=0, verbose_name="Resets")
    invariants_ok = models.BooleanField(default=True, verbose_name="Invariants OK")
    sparsity_ok = models.BooleanField(default=True, verbose_name="Sparse")
    output_dir = models.CharField(max_length=500, blank=True, verbose_name="Output directory")
    config = models.JSONField(default=dict, verbose_name="Configuration")
    created_at = models.DateTimeField(auto_now_add=True, verbose_name="Created at")

    class Meta:
        ordering = ['-created_at']
        verbose_name = "Experiment run"

    def __str__(self):
        return f"{self.command} {self.workload} n={self.n} seed={self.seed}"
