"""Constants and defaults for the post-training pipeline search engine."""

# Registry
INITIAL_PROVENANCE: str = "initial"
MODELS_KIND: str = "models"
LABEL_PREFIX: str = "0"
LABEL_SEPARATOR: str = "--"

# Prompts
EMPTY_MEMORY: str = "None"

# Simulated model space
DEFAULT_PHI: float = 0.3
DEFAULT_N0: float = 1000.0
DEFAULT_LR_REF: float = 1e-6

# Agent endpoint
DEFAULT_TEMPERATURE: float = 0.0
DEFAULT_MAX_TOKENS: int = 1024
DEFAULT_MAX_ATTEMPTS: int = 3
DEFAULT_BACKOFF_BASE: float = 0.5
DEFAULT_REQUEST_TIMEOUT: float = 60.0
DEFAULT_API_KEY_ENV: str = "OPENAI_API_KEY"
DEFAULT_CONTROLLER_MODEL: str = "gpt-4o-2024-08-06"

# Selection
DEFAULT_PARSE_RETRIES: int = 3
LLM_CONTROLLERS: tuple[str, ...] = ("LaMDAgent_gpt", "llm")
RANDOM_CONTROLLER: str = "random"
SCRIPTED_CONTROLLER: str = "scripted"

# Executors
DEFAULT_SHELL_TIMEOUT: float = 3600.0

# Statistics and experiments
DEFAULT_WINDOW: int = 15
DEFAULT_GRID_STEP: float = 0.1
DEFAULT_TOP_K: int = 3
DATA_SCALE_FACTORS: tuple[float, ...] = (2.0, 4.0, 6.0)

# File formats
CHECKPOINT_VERSION: int = 1
TRACE_VERSION: int = 1
REPORT_VERSION: int = 1
PIPELINE_VERSION: int = 1
