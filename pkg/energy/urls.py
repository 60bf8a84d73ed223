from django.urls import path
from . import views

app_name = "energy"

urlpatterns = [
    path(
        "summaries.csv",
        views.summaries_export_csv,
        name="summaries_export_csv",
    ),
    path(
        "runs/<int:run_id>/rounds.csv",
        views.run_rounds_export_csv,
        name="run_rounds_export_csv",
    ),
]
