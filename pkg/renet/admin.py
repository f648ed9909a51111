from django.contrib import admin
from .models import ExperimentRun

class ExperimentRunAdmin(admin.ModelAdmin):
    list_display = ('created_at', 'command', 'workload', 'n', 'm', 'c', 'seed', 'avg_cost', 'rho_stat', 'invariants_ok')
    list_filter = ('command', 'workload', 'invariants_ok', 'sparsity_ok')
    search_fields = ('workload', 'output_dir')
    readonly_fields = ('created_at',)

admin.site.register(ExperimentRun, ExperimentRunAdmin)
