"""Music track popularity regression from log-mel spectrograms plus catalog metadata."""

__version__ = "0.1.0"
