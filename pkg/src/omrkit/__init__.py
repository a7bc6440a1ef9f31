"""Classical staff detection, pitch inference and detection evaluation for OMR."""

__version__ = "0.1.0"
