"""Synthetic cohort module for LA-VA."""

from .cohort_generator import (
    SiteSpec, SynthConfig, generate_cohort, default_symptom_profile, simulate_ranked_predictions, symptom_ids,
    site_prevalence, synth_config_from_section
)

__all__ = [
    'SiteSpec', 'SynthConfig', 'generate_cohort', 'default_symptom_profile',
    'simulate_ranked_predictions', 'symptom_ids', 'site_prevalence', 'synth_config_from_section',
]
