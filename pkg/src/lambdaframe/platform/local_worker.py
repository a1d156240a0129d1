"""Entry point of a LOCAL worker process.

Connects back to the platform, then serves one request at a time: read a framed
payload, run the worker body, write the framed response. Exits when the platform
closes the connection.
"""

from __future__ import annotations

import argparse
import json
import logging
import os
import socket
import sys

from ..payload import encode_response
from ..storage import DataSource, DataSourceConfig, DirObjectStore
from ..worker import WorkerEnv, run_worker
from .framing import FramingError, recv_message, send_message


def main(argv=None) -> int:
    ap = argparse.ArgumentParser(prog="lambdaframe-worker")
    ap.add_argument("--connect", required=True, help="host:port of the platform")
    ap.add_argument("--store", required=True, help="object store root directory")
    ap.add_argument("--source", default="{}", help="data source config as JSON")
    args = ap.parse_args(argv)
    logging.basicConfig(level=logging.WARNING, stream=sys.stderr)

    host, port = args.connect.rsplit(":", 1)
    env = WorkerEnv.from_environ(
        DirObjectStore(args.store), DataSource(DataSourceConfig.from_json(json.loads(args.source))), os.environ
    )
    with socket.create_connection((host, int(port))) as sock:
        send_message(sock, str(os.getpid()).encode())
        while True:
            try:
                payload = recv_message(sock)
            except FramingError:
                return 0
            send_message(sock, encode_response(run_worker(payload, env)))


if __name__ == "__main__":
    sys.exit(main())
