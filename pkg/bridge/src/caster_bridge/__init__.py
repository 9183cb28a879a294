"""caster-bridge: fine-tune a small text-to-text transformer on commentary
pairs and serve it as an external generator over newline-delimited JSON."""

__version__ = "0.1.0"

TASK_PREFIX = "continue commentary: "
START_MARKER = "<start>"
END_MARKER = "<end>"
PROTOCOL_VERSION = 1
