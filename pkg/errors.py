"""
Error Types
===========
Shared exception base for the solver stack.

Every package raises its own subclass; `module` names the component that
failed so the CLI can print `error: <module>: <message>`.
"""


class SignHdgError(Exception):
    """Base exception for all solver-stack errors."""
    module = "core"
