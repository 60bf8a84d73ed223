from django.contrib import admin
from .models import (
    TrainingRun,
    RoundRecord,
    BenchmarkSummary,
    InstanceRecord,
)


# -------------------------
#  Training runs
# -------------------------

class RoundRecordInline(admin.TabularInline):
    model = RoundRecord
    extra = 0
    readonly_fields = (
        "round_number",
        "generation",
        "dataset_size",
        "train_loss",
        "validation_loss",
        "mean_revenue",
        "fallbacks",
    )


@admin.register(TrainingRun)
class TrainingRunAdmin(admin.ModelAdmin):
    list_display = (
        "id",
        "class_id",
        "scenario",
        "architecture",
        "seed",
        "trajectories",
        "rounds",
        "final_mean_revenue",
        "created_at",
    )
    list_filter = ("scenario", "architecture", "class_id")
    search_fields = ("class_id", "policy_path")
    inlines = [RoundRecordInline]


@admin.register(RoundRecord)
class RoundRecordAdmin(admin.ModelAdmin):
    list_display = (
        "run",
        "round_number",
        "generation",
        "dataset_size",
        "train_loss",
        "validation_loss",
        "mean_revenue",
        "fallbacks",
    )
    list_filter = ("run__architecture",)


# -------------------------
#  Benchmarks
# -------------------------

class InstanceRecordInline(admin.TabularInline):
    model = InstanceRecord
    extra = 0


@admin.register(BenchmarkSummary)
class BenchmarkSummaryAdmin(admin.ModelAdmin):
    list_display = (
        "class_id",
        "scenario",
        "architecture",
        "apply_mode",
        "n_included",
        "n_excluded",
        "mean_pct_optimal",
        "prop_above_threshold",
        "created_at",
    )
    list_filter = ("scenario", "architecture", "apply_mode", "class_id")
    inlines = [InstanceRecordInline]


@admin.register(InstanceRecord)
class InstanceRecordAdmin(admin.ModelAdmin):
    list_display = ("instance_id", "summary", "policy_revenue", "oracle_revenue", "pct_optimal", "excluded")
    list_filter = ("excluded", "summary__scenario")
    search_fields = ("instance_id",)
