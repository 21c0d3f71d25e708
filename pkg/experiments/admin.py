from django.contrib import admin
from .models import ExperimentRun, RoundMetric

admin.site.register(ExperimentRun)
admin.site.register(RoundMetric)
