from .args import (
    request_and_get_script_arguments,
    parse_config,
    ensure_output_dir,
    RunManifest,
    ScriptArgs,
    ConfigError,
    ConfigFileNotFound,
)

from .configs import (
    ScenarioConfig,
    FieldConfig,
    Nodes,
    RadioParams,
    Protocol,
    Routing,
    Seeds,
    Sweep,
    Logging,
)
