from django.apps import AppConfig


class ContinualConfig(AppConfig):
    default_auto_field = 'django.db.models.BigAutoField'
    name = 'continual'
    verbose_name = 'Continual learning across cohort exhaustion'
