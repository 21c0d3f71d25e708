"""
URL configuration for the cohortdp project.

The admin lists recorded experiment runs; the API exposes them read-only.
"""

from django.contrib import admin
from django.urls import path, include

urlpatterns = [
    path('admin/', admin.site.urls),
    path('api/runs/', include('experiments.api_urls')),
]
