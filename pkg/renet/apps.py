from django.apps import AppConfig


class RenetConfig(AppConfig):
    default_auto_field = 'django.db.models.BigAutoField'
    name = 'renet'
    verbose_name = 'Self-adjusting network simulator'
