import django.db.models.deletion
from django.db import migrations, models


class Migration(migrations.Migration):

    initial = True

    dependencies = [
    ]

    operations = [
        migrations.CreateModel(
            name='ExperimentRun',
            fields=[
                ('id', models.BigAutoField(auto_created=True, primary_key=True, serialize=False, verbose_name='ID')),
                ('kind', models.CharField(choices=[('TRAIN', 'Training'), ('RELAX', 'Relaxation'), ('SWEEP', 'Sweep'), ('EVALUATE', 'Evaluation')], default='TRAIN', max_length=10)),
                ('algorithm', models.CharField(choices=[('nonprivate', 'Non-private'), ('dp', 'Cohort DP'), ('dp-r', 'DP rehearsal'), ('dp-si', 'DP synaptic intelligence')], max_length=12)),
                ('config_hash', models.CharField(max_length=64)),
                ('seed', models.IntegerField(default=0)),
                ('status', models.CharField(choices=[('RUNNING', 'Running'), ('FINISHED', 'Finished'), ('FAILED', 'Failed')], default='RUNNING', max_length=10)),
                ('rounds', models.IntegerField(default=0)),
                ('query_counts', models.JSONField(blank=True, default=list)),
                ('final_micro_f1', models.FloatField(blank=True, null=True)),
                ('final_macro_f1', models.FloatField(blank=True, null=True)),
                ('final_weighted_f1', models.FloatField(blank=True, null=True)),
                ('metrics_path', models.CharField(blank=True, max_length=500)),
                ('checkpoint_path', models.CharField(blank=True, max_length=500)),
                ('config', models.JSONField(default=dict)),
                ('error', models.TextField(blank=True)),
                ('created_at', models.DateTimeField(auto_now_add=True)),
                ('finished_at', models.DateTimeField(blank=True, null=True)),
            ],
            options={
                'ordering': ['-created_at'],
            },
        ),
        migrations.CreateModel(
            name='RoundMetric',
            fields=[
                ('id', models.BigAutoField(auto_created=True, primary_key=True, serialize=False, verbose_name='ID')),
                ('round', models.IntegerField()),
                ('cohort_deltas', models.JSONField(default=list)),
                ('exhausted_flags', models.CharField(blank=True, max_length=64)),
                ('train_loss', models.FloatField(blank=True, null=True)),
                ('train_acc', models.FloatField(blank=True, null=True)),
                ('cohort_acc', models.JSONField(default=list)),
                ('test_micro_f1', models.FloatField(blank=True, null=True)),
                ('test_macro_f1', models.FloatField(blank=True, null=True)),
                ('test_weighted_f1', models.FloatField(blank=True, null=True)),
                ('wall_ms', models.FloatField(blank=True, null=True)),
                ('run', models.ForeignKey(on_delete=django.db.models.deletion.CASCADE, related_name='round_metrics', to='experiments.experimentrun')),
            ],
            options={
                'ordering': ['run', 'round'],
                'unique_together': {('run', 'round')},
            },
        ),
    ]
