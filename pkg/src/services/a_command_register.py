from services.verification_commands import (
    run_cutoff,
    run_fit,
    run_measures,
    run_proxy,
    run_regimes,
    run_sample,
    run_separation,
    run_slln,
    run_trace,
)

# Subcommand registry with descriptions, handlers and CSV output names
COMMAND_REGISTRY = {
    "sample": {
        "description": "Draws one perforated domain per eps and writes it as a replayable text file.",
        "handler": run_sample,
        "csv": "sample.csv",
    },
    "separation": {
        "description": "Checks the safety-ball separation per eps over seeds, or on a --fixture file.",
        "handler": run_separation,
        "csv": "separation.csv",
    },
    "slln": {
        "description": "Compares scaled counts and radius moments with their strong-law limits.",
        "handler": run_slln,
        "csv": "slln.csv",
    },
    "measures": {
        "description": "Fits hole volume, surface and count against their eps exponents.",
        "handler": run_measures,
        "csv": "measures.csv",
    },
    "cutoff": {
        "description": "Fits the W^{1,q} norm of 1 - g_eps against sigma and cross-checks by Monte Carlo.",
        "handler": run_cutoff,
        "csv": "cutoff.csv",
    },
    "proxy": {
        "description": "Sweeps the Robin temperature proxy and checks the distance to the unperforated solution.",
        "handler": run_proxy,
        "csv": "proxy.csv",
    },
    "trace": {
        "description": "Fits the hole-boundary trace norm of the proxy solution against its bound.",
        "handler": run_trace,
        "csv": "trace.csv",
    },
    "fit": {
        "description": "Fits a power law to an (eps, value) CSV given by --input.",
        "handler": run_fit,
        "csv": "fit.csv",
    },
    "regimes": {
        "description": "Lists the parameter-regime conditions for the configured alpha, q and radius law.",
        "handler": run_regimes,
        "csv": "regimes.csv",
    },
}
