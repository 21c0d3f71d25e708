from django.db import models


class ExperimentRun(models.Model):
    KIND_CHOICES = [
        ('TRAIN', 'Training'),
        ('RELAX', 'Relaxation'),
        ('SWEEP', 'Sweep'),
        ('EVALUATE', 'Evaluation'),
    ]
    STATUS_CHOICES = [
        ('RUNNING', 'Running'),
        ('FINISHED', 'Finished'),
        ('FAILED', 'Failed'),
    ]
    ALGORITHM_CHOICES = [
        ('nonprivate', 'Non-private'),
        ('dp', 'Cohort DP'),
        ('dp-r', 'DP rehearsal'),
        ('dp-si', 'DP synaptic intelligence'),
    ]

    kind = models.CharField(max_length=10, choices=KIND_CHOICES, default='TRAIN')
    algorithm = models.CharField(max_length=12, choices=ALGORITHM_CHOICES)
    config_hash = models.CharField(max_length=64)
    seed = models.IntegerField(default=0)
    status = models.CharField(max_length=10, choices=STATUS_CHOICES, default='RUNNING')

    rounds = models.IntegerField(default=0)
    query_counts = models.JSONField(default=list, blank=True)
    final_micro_f1 = models.FloatField(null=True, blank=True)
    final_macro_f1 = models.FloatField(null=True, blank=True)
    final_weighted_f1 = models.FloatField(null=True, blank=True)

    metrics_path = models.CharField(max_length=500, blank=True)
    checkpoint_path = models.CharField(max_length=500, blank=True)
    config = models.JSONField(default=dict)
    error = models.TextField(blank=True)

    created_at = models.DateTimeField(auto_now_add=True)
    finished_at = models.DateTimeField(null=True, blank=True)

    class Meta:
        ordering = ['-created_at']

    def __str__(self):
        return f"{self.get_kind_display()} {self.algorithm} seed={self.seed} ({self.status})"


class RoundMetric(models.Model):
    run = models.ForeignKey(ExperimentRun, on_delete=models.CASCADE, related_name='round_metrics')
    round = models.IntegerField()
    cohort_deltas = models.JSONField(default=list)
    exhausted_flags = models.CharField(max_length=64, blank=True)
    train_loss = models.FloatField(null=True, blank=True)
    train_acc = models.FloatField(null=True, blank=True)
    cohort_acc = models.JSONField(default=list)
    test_micro_f1 = models.FloatField(null=True, blank=True)
    test_macro_f1 = models.FloatField(null=True, blank=True)
    test_weighted_f1 = models.FloatField(null=True, blank=True)
    wall_ms = models.FloatField(null=True, blank=True)

    class Meta:
        ordering = ['run', 'round']
        unique_together = ('run', 'round')

    def __str__(self):
        return f"{self.run_id} round {self.round}"
