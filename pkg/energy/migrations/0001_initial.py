# Generated by Django 5.2.8 on 2026-10-17 09:12

import django.db.models.deletion
from django.db import migrations, models


SCENARIO_CHOICES = [
    ("high", "High efficiency (eta 0.05)"),
    ("low", "Low efficiency (eta 0.3)"),
]

ARCHITECTURE_CHOICES = [
    ("ols", "Ordinary least squares"),
    ("svr", "Linear support vector regression"),
    ("nn", "Feed-forward neural network"),
    ("naive", "Naive pass-through policy"),
]


class Migration(migrations.Migration):

    initial = True

    dependencies = []

    operations = [
        migrations.CreateModel(
            name="TrainingRun",
            fields=[
                (
                    "id",
                    models.BigAutoField(
                        auto_created=True,
                        primary_key=True,
                        serialize=False,
                        verbose_name="ID",
                    ),
                ),
                ("class_id", models.CharField(help_text="Data class, e.g. S1", max_length=8)),
                ("scenario", models.CharField(choices=SCENARIO_CHOICES, max_length=8)),
                ("architecture", models.CharField(choices=ARCHITECTURE_CHOICES, max_length=8)),
                ("seed", models.BigIntegerField(default=0)),
                (
                    "trajectories",
                    models.PositiveIntegerField(
                        help_text="Simulated trajectories per initial level (M)"
                    ),
                ),
                ("rounds", models.PositiveIntegerField(help_text="Improvement rounds (N)")),
                ("horizon", models.PositiveIntegerField(default=10)),
                ("policy_path", models.CharField(blank=True, max_length=500)),
                ("model_path", models.CharField(blank=True, max_length=500)),
                ("created_at", models.DateTimeField(auto_now_add=True)),
            ],
            options={
                "ordering": ["-created_at"],
            },
        ),
        migrations.CreateModel(
            name="RoundRecord",
            fields=[
                (
                    "id",
                    models.BigAutoField(
                        auto_created=True,
                        primary_key=True,
                        serialize=False,
                        verbose_name="ID",
                    ),
                ),
                ("round_number", models.PositiveIntegerField()),
                (
                    "generation",
                    models.PositiveIntegerField(
                        help_text="Policy generation simulated in this round"
                    ),
                ),
                ("dataset_size", models.PositiveIntegerField()),
                ("train_loss", models.FloatField(blank=True, null=True)),
                ("validation_loss", models.FloatField(blank=True, null=True)),
                ("mean_revenue", models.FloatField()),
                ("fallbacks", models.PositiveIntegerField(default=0)),
                (
                    "run",
                    models.ForeignKey(
                        on_delete=django.db.models.deletion.CASCADE,
                        related_name="rounds_log",
                        to="energy.trainingrun",
                    ),
                ),
            ],
            options={
                "ordering": ["run", "round_number"],
                "constraints": [
                    models.UniqueConstraint(
                        fields=("run", "round_number"), name="unique_round_per_run"
                    )
                ],
            },
        ),
        migrations.CreateModel(
            name="BenchmarkSummary",
            fields=[
                (
                    "id",
                    models.BigAutoField(
                        auto_created=True,
                        primary_key=True,
                        serialize=False,
                        verbose_name="ID",
                    ),
                ),
                ("class_id", models.CharField(max_length=8)),
                ("scenario", models.CharField(choices=SCENARIO_CHOICES, max_length=8)),
                ("architecture", models.CharField(choices=ARCHITECTURE_CHOICES, max_length=8)),
                (
                    "apply_mode",
                    models.CharField(
                        choices=[
                            ("table", "Policy table with naive fallback"),
                            ("online_greedy", "Online greedy with value model"),
                        ],
                        default="online_greedy",
                        max_length=16,
                    ),
                ),
                ("n_included", models.PositiveIntegerField()),
                ("n_excluded", models.PositiveIntegerField(default=0)),
                ("mean_pct_optimal", models.FloatField(blank=True, null=True)),
                ("prop_above_threshold", models.FloatField(blank=True, null=True)),
                ("threshold", models.FloatField(default=80.0)),
                ("created_at", models.DateTimeField(auto_now_add=True)),
            ],
            options={
                "ordering": ["-created_at"],
                "verbose_name_plural": "benchmark summaries",
            },
        ),
        migrations.CreateModel(
            name="InstanceRecord",
            fields=[
                (
                    "id",
                    models.BigAutoField(
                        auto_created=True,
                        primary_key=True,
                        serialize=False,
                        verbose_name="ID",
                    ),
                ),
                ("instance_id", models.CharField(max_length=64)),
                ("policy_revenue", models.FloatField()),
                ("oracle_revenue", models.FloatField()),
                ("pct_optimal", models.FloatField(blank=True, null=True)),
                (
                    "excluded",
                    models.BooleanField(
                        default=False,
                        help_text="Hindsight optimum was not positive, so the ratio is undefined",
                    ),
                ),
                (
                    "summary",
                    models.ForeignKey(
                        on_delete=django.db.models.deletion.CASCADE,
                        related_name="instances",
                        to="energy.benchmarksummary",
                    ),
                ),
            ],
            options={
                "ordering": ["summary", "instance_id"],
            },
        ),
    ]
