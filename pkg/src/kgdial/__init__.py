"""Knowledge-grounded task-oriented dialogue toolkit.

Three stages (knowledge-seeking turn detection, knowledge selection with
weighted negative sampling, grounded response generation), a spoken-style
training-data synthesizer, and the evaluation metrics, all trained from
scratch on small models.
"""

__version__ = "0.1.0"
