"""Multi-tenant online-IDE backend.

Multiplexes many editing sessions onto a shared pool of language-server
nodes: metric-based load balancing, a debouncing/coalescing JSON-RPC
gateway with per-session URI isolation, git-backed workspaces with idle
cleanup, and sandboxed terminal/run execution.
"""

__version__ = "0.1.0"
