"""sciconsult: questionnaire-driven, literature-grounded modeling consultant."""

__version__ = "0.1.0"
