#!/usr/bin/env python3
"""
Load subrq settings from .env.local and the process environment

Recognised keys:
    SUBRQ_THREADS   worker cap for scans and column assembly (default 1)
    SUBRQ_OUT_DIR   default report directory (default reports)
    SUBRQ_DB        DuckDB run-history file (unset = no history)
    SUBRQ_RTOL      integrator relative tolerance (default 1e-11)
    SUBRQ_ATOL      integrator absolute tolerance (default 1e-12)

Usage:
    from shared.load_env import load_dotenv, get_setting
    load_dotenv()
    threads = get_setting('SUBRQ_THREADS', 1, int)
"""

import os
from pathlib import Path


DEFAULTS = {
    'SUBRQ_THREADS': '1',
    'SUBRQ_OUT_DIR': 'reports',
    'SUBRQ_RTOL': '1e-11',
    'SUBRQ_ATOL': '1e-12',
}


def load_dotenv(env_file=None, verbose=False):
    """Load KEY=VALUE pairs from .env.local without overriding the environment"""
    if env_file is None:
        env_file = Path(__file__).parent.parent.parent / '.env.local'
    env_file = Path(env_file)

    if not env_file.exists():
        if verbose:
            print(f"⚠️  .env.local file not found at {env_file}, using defaults")
        return False

    with open(env_file, 'r') as f:
        for line in f:
            line = line.strip()

            # Skip empty lines and comments
            if not line or line.startswith('#'):
                continue

            if '=' in line:
                key, value = line.split('=', 1)
                key = key.strip()
                value = value.strip()

                if value.startswith('"') and value.endswith('"'):
                    value = value[1:-1]
                elif value.startswith("'") and value.endswith("'"):
                    value = value[1:-1]

                if key not in os.environ:
                    os.environ[key] = value

    return True


def get_setting(name, default=None, cast=str):
    """
    Read one setting

    Args:
        name: Environment key (e.g. 'SUBRQ_THREADS')
        default: Returned when neither the environment nor DEFAULTS has the key
        cast: Callable applied to the raw string

    Returns:
        The cast value, or default
    """
    raw = os.environ.get(name, DEFAULTS.get(name))
    if raw is None or raw == '':
        return default
    try:
        return cast(raw)
    except (TypeError, ValueError):
        print(f"⚠️  Ignoring malformed setting {name}={raw!r}")
        return default


def integrator_tolerances():
    """(rtol, atol) for solve_ivp calls"""
    return get_setting('SUBRQ_RTOL', 1e-11, float), get_setting('SUBRQ_ATOL', 1e-12, float)


if __name__ == '__main__':
    if load_dotenv(verbose=True):
        print("✅ Environment variables loaded from .env.local")
    for key in ('SUBRQ_THREADS', 'SUBRQ_OUT_DIR', 'SUBRQ_DB', 'SUBRQ_RTOL', 'SUBRQ_ATOL'):
        print(f"   {key} = {get_setting(key)}")
