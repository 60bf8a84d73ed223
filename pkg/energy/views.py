import csv

from django.http import HttpResponse
from django.shortcuts import get_object_or_404
from django.contrib.admin.views.decorators import staff_member_required

from .formats import DIAGNOSTICS_HEADER, SUMMARY_HEADER
from .models import BenchmarkSummary, TrainingRun


def _blank(value):
    return "" if value is None else value


@staff_member_required
def summaries_export_csv(request):
    """
    Export benchmark summaries with the bench summary CSV columns.
    Optional filters: ?scenario=high|low and ?arch=ols|svr|nn|naive.
    """
    summaries = BenchmarkSummary.objects.all()

    scenario = request.GET.get("scenario")
    architecture = request.GET.get("arch")
    if scenario:
        summaries = summaries.filter(scenario=scenario)
    if architecture:
        summaries = summaries.filter(architecture=architecture)

    summaries = summaries.order_by("scenario", "class_id", "architecture", "created_at")

    response = HttpResponse(content_type="text/csv")
    response["Content-Disposition"] = 'attachment; filename="summaries.csv"'
    writer = csv.writer(response)
    writer.writerow(SUMMARY_HEADER)
    for s in summaries:
        writer.writerow(
            [
                s.class_id,
                s.scenario,
                s.architecture,
                s.n_included,
                s.n_excluded,
                _blank(s.mean_pct_optimal),
                _blank(s.prop_above_threshold),
            ]
        )
    return response


@staff_member_required
def run_rounds_export_csv(request, run_id):
    run = get_object_or_404(TrainingRun, pk=run_id)

    response = HttpResponse(content_type="text/csv")
    response["Content-Disposition"] = f'attachment; filename="run_{run.id}_rounds.csv"'
    writer = csv.writer(response)
    writer.writerow(DIAGNOSTICS_HEADER)
    for r in run.rounds_log.order_by("round_number"):
        writer.writerow(
            [
                r.round_number,
                r.generation,
                r.dataset_size,
                _blank(r.train_loss),
                _blank(r.validation_loss),
                r.mean_revenue,
                r.fallbacks,
            ]
        )
    return response
