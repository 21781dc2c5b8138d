"""Predicting video exit points from news-site clickstreams.

Stages: ``ingest`` (dump parsing), ``sessionizer``, ``video_labeler``,
``feature_select``, ``learners``, ``evaluation``, ``synth`` and ``cli``.
"""

__version__ = "0.1.0"
