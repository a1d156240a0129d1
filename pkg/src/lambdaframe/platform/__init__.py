from .base import INJECTED, PLATFORM_KINDS, TIMEOUT, TRANSPORT, Backend, Controller, Invocation
from .config import FailureSpec, PlatformConfig, load_config
from .local import LocalPlatform
from .sim import SimPlatform
from .throttle import TokenBucket, admission_spread_s

__all__ = [
    "INJECTED", "PLATFORM_KINDS", "TIMEOUT", "TRANSPORT", "Backend", "Controller", "Invocation",
    "FailureSpec", "PlatformConfig", "load_config",
    "LocalPlatform", "SimPlatform",
    "TokenBucket", "admission_spread_s",
]
