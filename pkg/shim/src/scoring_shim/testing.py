"""Launch the shim on an ephemeral port for integration tests."""

from __future__ import annotations

import threading
import time
from contextlib import contextmanager

import uvicorn

from .model import load_model
from .server import create_app


@contextmanager
def launch_server(model: str = "builtin:tiny", max_concurrency: int = 4):
    """Yields the base URL of a running shim; stops it on exit."""
    service = load_model(model)
    app = create_app(service, max_concurrency=max_concurrency, model_name=model)
    config = uvicorn.Config(app, host="127.0.0.1", port=0, log_level="warning")
    server = uvicorn.Server(config)
    thread = threading.Thread(target=server.run, daemon=True)
    thread.start()
    deadline = time.monotonic() + 30
    while not server.started:
        if time.monotonic() > deadline:
            raise RuntimeError("shim server failed to start within 30s")
        time.sleep(0.02)
    port = server.servers[0].sockets[0].getsockname()[1]
    try:
        yield f"http://127.0.0.1:{port}"
    finally:
        server.should_exit = True
        thread.join(timeout=10)
