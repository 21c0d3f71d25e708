from django.urls import path
from . import api_views

urlpatterns = [
    path('', api_views.run_list_api, name='api_run_list'),
    path('<int:pk>/', api_views.run_detail_api, name='api_run_detail'),
    path('<int:pk>/metrics/', api_views.run_metrics_api, name='api_run_metrics'),
]
