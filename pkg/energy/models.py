from django.db import models, transaction


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

APPLY_MODE_CHOICES = [
    ("table", "Policy table with naive fallback"),
    ("online_greedy", "Online greedy with value model"),
]


class TrainingRun(models.Model):
    """
    One `train` invocation: class, scenario, architecture and run sizes,
    plus where the policy table and value model were written.
    """

    class_id = models.CharField(max_length=8, help_text="Data class, e.g. S1")
    scenario = models.CharField(max_length=8, choices=SCENARIO_CHOICES)
    architecture = models.CharField(max_length=8, choices=ARCHITECTURE_CHOICES)
    seed = models.BigIntegerField(default=0)
    trajectories = models.PositiveIntegerField(help_text="Simulated trajectories per initial level (M)")
    rounds = models.PositiveIntegerField(help_text="Improvement rounds (N)")
    horizon = models.PositiveIntegerField(default=10)
    policy_path = models.CharField(max_length=500, blank=True)
    model_path = models.CharField(max_length=500, blank=True)

    created_at = models.DateTimeField(auto_now_add=True)

    class Meta:
        ordering = ["-created_at"]

    def __str__(self):
        return f"{self.class_id}/{self.scenario}/{self.architecture} (seed {self.seed})"

    @property
    def final_mean_revenue(self):
        last = self.rounds_log.order_by("-round_number").first()
        return last.mean_revenue if last else None

    @classmethod
    def record(cls, run_config, diagnostics, policy_path="", model_path=""):
        with transaction.atomic():
            run = cls.objects.create(
                class_id=run_config.class_id,
                scenario=run_config.scenario,
                architecture=run_config.architecture,
                seed=run_config.seed,
                trajectories=run_config.trajectories,
                rounds=run_config.rounds,
                horizon=run_config.horizon,
                policy_path=str(policy_path or ""),
                model_path=str(model_path or ""),
            )
            RoundRecord.objects.bulk_create([
                RoundRecord(
                    run=run,
                    round_number=d.round,
                    generation=d.generation,
                    dataset_size=d.dataset_size,
                    train_loss=d.train_loss,
                    validation_loss=d.validation_loss,
                    mean_revenue=d.mean_revenue,
                    fallbacks=d.fallbacks,
                )
                for d in diagnostics
            ])
        return run


class RoundRecord(models.Model):
    run = models.ForeignKey(
        TrainingRun,
        on_delete=models.CASCADE,
        related_name="rounds_log",
    )
    round_number = models.PositiveIntegerField()
    generation = models.PositiveIntegerField(help_text="Policy generation simulated in this round")
    dataset_size = models.PositiveIntegerField()
    train_loss = models.FloatField(null=True, blank=True)
    validation_loss = models.FloatField(null=True, blank=True)
    mean_revenue = models.FloatField()
    fallbacks = models.PositiveIntegerField(default=0)

    class Meta:
        ordering = ["run", "round_number"]
        constraints = [
            models.UniqueConstraint(fields=["run", "round_number"], name="unique_round_per_run"),
        ]

    def __str__(self):
        return f"Run #{self.run_id} round {self.round_number}"


class BenchmarkSummary(models.Model):
    """Per-class %-optimal summary of one policy over a set of instances."""

    class_id = models.CharField(max_length=8)
    scenario = models.CharField(max_length=8, choices=SCENARIO_CHOICES)
    architecture = models.CharField(max_length=8, choices=ARCHITECTURE_CHOICES)
    apply_mode = models.CharField(max_length=16, choices=APPLY_MODE_CHOICES, default="online_greedy")
    n_included = models.PositiveIntegerField()
    n_excluded = models.PositiveIntegerField(default=0)
    mean_pct_optimal = models.FloatField(null=True, blank=True)
    prop_above_threshold = models.FloatField(null=True, blank=True)
    threshold = models.FloatField(default=80.0)

    created_at = models.DateTimeField(auto_now_add=True)

    class Meta:
        ordering = ["-created_at"]
        verbose_name_plural = "benchmark summaries"

    def __str__(self):
        return f"{self.class_id}/{self.scenario}/{self.architecture}"

    @classmethod
    def record(cls, summary, results, apply_mode):
        with transaction.atomic():
            row = cls.objects.create(
                class_id=summary.class_id,
                scenario=summary.scenario,
                architecture=summary.architecture,
                apply_mode=apply_mode,
                n_included=summary.n_included,
                n_excluded=summary.n_excluded,
                mean_pct_optimal=summary.mean_pct_optimal,
                prop_above_threshold=summary.prop_above_threshold,
                threshold=summary.threshold,
            )
            InstanceRecord.objects.bulk_create([
                InstanceRecord(
                    summary=row,
                    instance_id=r.instance_id,
                    policy_revenue=r.policy_revenue,
                    oracle_revenue=r.oracle_revenue,
                    pct_optimal=r.pct_optimal,
                    excluded=r.excluded,
                )
                for r in results
            ])
        return row


class InstanceRecord(models.Model):
    summary = models.ForeignKey(
        BenchmarkSummary,
        on_delete=models.CASCADE,
        related_name="instances",
    )
    instance_id = models.CharField(max_length=64)
    policy_revenue = models.FloatField()
    oracle_revenue = models.FloatField()
    pct_optimal = models.FloatField(null=True, blank=True)
    excluded = models.BooleanField(
        default=False,
        help_text="Hindsight optimum was not positive, so the ratio is undefined",
    )

    class Meta:
        ordering = ["summary", "instance_id"]

    def __str__(self):
        return self.instance_id
