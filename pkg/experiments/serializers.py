from rest_framework import serializers

from .models import ExperimentRun, RoundMetric

ALGORITHM_CHOICES = ['nonprivate', 'dp', 'dp-r', 'dp-si']
OPTIMIZER_CHOICES = ['adagrad', 'sgd']


class ExperimentConfigSerializer(serializers.Serializer):
    """Validates a flat experiment config; defaults are the reference setup."""

    algorithm = serializers.ChoiceField(choices=ALGORITHM_CHOICES, default='dp')

    # cohorts and privacy
    epsilons = serializers.ListField(child=serializers.FloatField(), min_length=1, default=[6.0, 8.0])
    clients_per_cohort = serializers.IntegerField(min_value=1, default=100)
    sample_fraction = serializers.FloatField(default=0.05)
    sigma = serializers.FloatField(min_value=0, default=1.0)
    sensitivity = serializers.FloatField(default=1.0)
    delta_threshold = serializers.FloatField(default=1e-5)
    sigma_schedule = serializers.ListField(child=serializers.FloatField(min_value=0), default=list)

    # model and local optimizer
    hidden = serializers.ListField(child=serializers.IntegerField(min_value=1), default=[79, 128])
    optimizer = serializers.ChoiceField(choices=OPTIMIZER_CHOICES, default='adagrad')
    learning_rate = serializers.FloatField(default=0.1)
    batch_size = serializers.IntegerField(min_value=1, default=10)
    local_epochs = serializers.IntegerField(min_value=0, default=1)

    # continual learning
    rho = serializers.FloatField(min_value=0, default=0.25)
    rho_per_cohort = serializers.ListField(child=serializers.FloatField(min_value=0), default=list)
    gamma = serializers.FloatField(min_value=0, default=1.0)
    xi = serializers.FloatField(default=0.1)
    t_max = serializers.IntegerField(min_value=0, default=0)

    # data
    data_path = serializers.CharField(allow_blank=True, default='')
    synth_total = serializers.IntegerField(min_value=1, default=20000)
    synth_min_per_class = serializers.IntegerField(min_value=0, default=200)
    separation = serializers.FloatField(min_value=0, default=3.0)
    test_fraction = serializers.FloatField(default=0.2)

    # seeds
    seed = serializers.IntegerField(min_value=0, default=0)
    partition_seed = serializers.IntegerField(min_value=0, allow_null=True, default=None)
    init_seed = serializers.IntegerField(min_value=0, allow_null=True, default=None)

    # run control
    eval_every = serializers.IntegerField(min_value=1, default=5)
    max_rounds = serializers.IntegerField(min_value=1, default=1000)
    record_timing = serializers.BooleanField(default=False)
    workers = serializers.IntegerField(min_value=1, allow_null=True, default=None)
    sweep_seeds = serializers.IntegerField(min_value=1, default=5)

    def validate(self, data):
        unknown = sorted(set(self.initial_data) - set(self.fields))
        if unknown:
            raise serializers.ValidationError({key: 'Unknown config key.' for key in unknown})

        errors = {}
        if any(e <= 0 for e in data['epsilons']):
            errors['epsilons'] = 'Every epsilon must be positive.'
        if not 0.0 < data['sample_fraction'] <= 1.0:
            errors['sample_fraction'] = 'Must lie in (0, 1].'
        if data['sensitivity'] <= 0:
            errors['sensitivity'] = 'Clip bound must be positive.'
        if not 0.0 < data['delta_threshold'] < 1.0:
            errors['delta_threshold'] = 'Must lie in (0, 1).'
        if data['algorithm'] != 'nonprivate' and data['sigma'] <= 0:
            errors['sigma'] = 'Private training needs a positive noise multiplier.'
        if data['algorithm'] != 'nonprivate' and any(s <= 0 for s in data['sigma_schedule']):
            errors['sigma_schedule'] = 'Every scheduled noise multiplier must be positive.'
        if data['learning_rate'] <= 0:
            errors['learning_rate'] = 'Must be positive.'
        if data['xi'] <= 0:
            errors['xi'] = 'Damping must be positive.'
        if not 0.0 < data['test_fraction'] < 1.0:
            errors['test_fraction'] = 'Must lie in (0, 1).'
        rhos = data['rho_per_cohort'] or [data['rho']]
        if any(not 0.0 <= r < 1.0 for r in rhos):
            errors['rho'] = 'Rehearsal ratio must lie in [0, 1).'
        if data['rho_per_cohort'] and len(data['rho_per_cohort']) != len(data['epsilons']):
            errors['rho_per_cohort'] = 'Needs one value per cohort.'
        if errors:
            raise serializers.ValidationError(errors)
        return data


class RoundMetricSerializer(serializers.ModelSerializer):
    class Meta:
        model = RoundMetric
        fields = [
            'round', 'cohort_deltas', 'exhausted_flags', 'train_loss', 'train_acc',
            'cohort_acc', 'test_micro_f1', 'test_macro_f1', 'test_weighted_f1', 'wall_ms',
        ]


class ExperimentRunSerializer(serializers.ModelSerializer):
    status_display = serializers.CharField(source='get_status_display', read_only=True)
    kind_display = serializers.CharField(source='get_kind_display', read_only=True)
    metrics_count = serializers.SerializerMethodField()

    class Meta:
        model = ExperimentRun
        fields = [
            'id', 'kind', 'kind_display', 'algorithm', 'config_hash', 'seed',
            'status', 'status_display', 'rounds', 'query_counts',
            'final_micro_f1', 'final_macro_f1', 'final_weighted_f1',
            'metrics_path', 'checkpoint_path', 'config', 'error',
            'metrics_count', 'created_at', 'finished_at',
        ]

    def get_metrics_count(self, obj):
        return obj.round_metrics.count()
