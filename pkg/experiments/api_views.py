from rest_framework import status
from rest_framework.decorators import api_view
from rest_framework.response import Response
from django.shortcuts import get_object_or_404

from .models import ExperimentRun
from .serializers import ExperimentRunSerializer, RoundMetricSerializer


@api_view(['GET'])
def run_list_api(request):
    qs = ExperimentRun.objects.all()

    algorithm = request.GET.get("algorithm")
    kind = request.GET.get("kind")
    status_filter = request.GET.get("status")

    if algorithm:
        qs = qs.filter(algorithm=algorithm)
    if kind:
        qs = qs.filter(kind=kind.upper())
    if status_filter:
        qs = qs.filter(status=status_filter.upper())

    serializer = ExperimentRunSerializer(qs, many=True)
    return Response(serializer.data)


@api_view(['GET'])
def run_detail_api(request, pk):
    run = get_object_or_404(ExperimentRun, pk=pk)
    serializer = ExperimentRunSerializer(run)
    return Response(serializer.data)


@api_view(['GET'])
def run_metrics_api(request, pk):
    run = get_object_or_404(ExperimentRun, pk=pk)
    rows = run.round_metrics.all()

    # ?since=<round> returns only later rounds
    since = request.GET.get("since")
    if since:
        try:
            rows = rows.filter(round__gt=int(since))
        except ValueError:
            return Response(
                {"error": "since must be a round number"},
                status=status.HTTP_400_BAD_REQUEST
            )

    serializer = RoundMetricSerializer(rows, many=True)
    return Response(serializer.data)
