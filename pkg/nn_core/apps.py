from django.apps import AppConfig


class NnCoreConfig(AppConfig):
    default_auto_field = 'django.db.models.BigAutoField'
    name = 'nn_core'
    verbose_name = 'MLP core'
