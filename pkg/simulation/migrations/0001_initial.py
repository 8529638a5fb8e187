import django.utils.timezone
from django.db import migrations, models


class Migration(migrations.Migration):

    initial = True

    dependencies = [
    ]

    operations = [
        migrations.CreateModel(
            name='LabRun',
            fields=[
                ('id', models.BigAutoField(auto_created=True, primary_key=True, serialize=False, verbose_name='ID')),
                ('subcommand', models.CharField(choices=[('simulate', 'Simulate'), ('sweep-velocity', 'Velocity sweep'), ('threshold', 'Formation threshold'), ('height-trace', 'Height trace'), ('gl-compare', 'GL comparison')], max_length=20)),
                ('config_digest', models.CharField(db_index=True, max_length=64)),
                ('parameters', models.JSONField(blank=True, default=dict)),
                ('output_dir', models.CharField(max_length=500)),
                ('outputs', models.JSONField(blank=True, default=list, help_text='Files written by the run')),
                ('status', models.CharField(choices=[('running', 'Running'), ('succeeded', 'Succeeded'), ('failed', 'Failed')], default='running', max_length=20)),
                ('exit_code', models.IntegerField(blank=True, null=True)),
                ('error_message', models.TextField(blank=True)),
                ('started_at', models.DateTimeField(default=django.utils.timezone.now)),
                ('finished_at', models.DateTimeField(blank=True, null=True)),
            ],
            options={
                'verbose_name': 'Lab run',
                'verbose_name_plural': 'Lab runs',
                'ordering': ['-started_at'],
                'indexes': [models.Index(fields=['subcommand', '-started_at'], name='labrun_subcommand_idx')],
            },
        ),
    ]
