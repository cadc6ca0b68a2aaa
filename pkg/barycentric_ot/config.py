"""
Configuration module for the barycentric transport toolkit.
Loads environment variables and provides solver settings.
"""

import os
from pydantic_settings import BaseSettings, SettingsConfigDict
from dotenv import load_dotenv

# Load environment variables from .env file
load_dotenv()


class Settings(BaseSettings):
    """Solver settings loaded from environment variables (prefix WOT_)."""

    model_config = SettingsConfigDict(env_file=".env", env_prefix="WOT_", extra="ignore")

    # Logging
    log_level: str = os.getenv("LOG_LEVEL", "WARNING")

    # Dense simplex
    lp_pivot_tol: float = 1e-9
    lp_feasibility_tol: float = 1e-9
    lp_max_iters: int = 50000
    lp_bland_after: int = 1000  # degenerate pivots before switching to Bland's rule
    marginal_tol: float = 1e-9
    reduced_cost_tol: float = 1e-9

    # Frank-Wolfe
    fw_tol_scale: float = 1e-8
    fw_max_iters: int = 100000
    fw_away_steps: bool = True
    merge_eps_scale: float = 1e-7

    # Certificates and checks
    support_eps: float = 1e-10
    certificate_tol: float = 1e-6
    equality_tol: float = 1e-4
    projection_distance_tol: float = 1e-4
    subgradient_tol: float = 1e-6
    regularity_tol: float = 1e-6

    # Orders
    order_exact_tol: float = 1e-9
    order_marginal_tol: float = 1e-6
    icx_tol: float = 1e-10
    cdf_tol: float = 1e-12

    # Simplex closed form
    simplex_root_tol: float = 1e-8
    simplex_max_iters: int = 500
    simplex_kkt_tol: float = 1e-10

    # Brute-force oracle
    oracle_restarts: int = 32
    oracle_max_size: int = 64

    # Reproducibility
    seed: int = 0


# Global settings instance
settings = Settings()
