"""N-ary drug combination extraction: parsing, metrics, rewards and trace synthesis."""

__version__ = "1.0.0"
