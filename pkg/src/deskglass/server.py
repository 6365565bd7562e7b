"""Websocket transport for tracking sessions.

One session per connection, JSON text messages, bounded outbound queue
per client with a drop-oldest-state / never-drop-event policy so a slow
consumer cannot stall ingestion.
"""

import asyncio
import json
import logging
from collections import deque
from typing import Optional

import websockets

from .session import DEFAULT_DECIMATION, DEFAULT_MAX_SESSIONS, SessionError, SessionManager

logger = logging.getLogger("deskglass.server")

DEFAULT_QUEUE_LIMIT = 256
_DROPPABLE = ("state", "frame")


class OutboundQueue:
    """Bounded message queue; drops the oldest droppable message when full.

    Events (and acks/errors) are never dropped, so the queue may exceed the
    soft limit if a client starves while events pile up.
    """

    def __init__(self, limit: int = DEFAULT_QUEUE_LIMIT):
        self.limit = limit
        self._items = deque()
        self._ready = asyncio.Event()
        self.dropped = 0

    def put(self, message: dict) -> None:
        if len(self._items) >= self.limit:
            for i, item in enumerate(self._items):
                if item.get("type") in _DROPPABLE:
                    del self._items[i]
                    self.dropped += 1
                    break
        self._items.append(message)
        self._ready.set()

    async def get(self) -> dict:
        while not self._items:
            self._ready.clear()
            await self._ready.wait()
        return self._items.popleft()


async def _sender(ws, queue: OutboundQueue):
    while True:
        message = await queue.get()
        await ws.send(json.dumps(message))


async def _handle_connection(ws, manager: SessionManager):
    queue = OutboundQueue()
    send_task = asyncio.create_task(_sender(ws, queue))
    session = None
    try:
        async for raw in ws:
            try:
                payload = json.loads(raw)
            except json.JSONDecodeError as exc:
                queue.put({"type": "error", "code": "bad_message", "detail": str(exc)})
                continue
            kind = payload.get("type")
            try:
                if kind == "init":
                    if session is not None:
                        queue.put({
                            "type": "error", "code": "bad_message",
                            "detail": "session already initialized on this connection",
                        })
                        continue
                    session = manager.open(payload.get("config", {}))
                    logger.info("session %s opened", session.config.session_id)
                    queue.put(session.ack())
                elif session is None:
                    queue.put({
                        "type": "error", "code": "unknown_session",
                        "detail": "send init first",
                    })
                elif kind == "reset":
                    queue.put(session.reset())
                elif kind == "frame_request":
                    queue.put(session._frame_message())
                elif kind in ("imu", "pointer"):
                    for message in session.ingest(payload):
                        queue.put(message)
                else:
                    queue.put({
                        "type": "error", "code": "bad_message",
                        "detail": f"unknown message type {kind!r}",
                    })
            except SessionError as exc:
                queue.put({"type": "error", "code": exc.code, "detail": exc.detail})
            except Exception:
                logger.exception("session failure (isolated to this connection)")
                queue.put({
                    "type": "error", "code": "internal",
                    "detail": "internal error; session reset recommended",
                })
    except websockets.ConnectionClosed:
        pass
    finally:
        send_task.cancel()
        if session is not None:
            manager.close(session.config.session_id)
            logger.info("session %s closed", session.config.session_id)


async def serve(
    port: int,
    max_sessions: int = DEFAULT_MAX_SESSIONS,
    decimation: int = DEFAULT_DECIMATION,
    host: str = "127.0.0.1",
    ready_callback=None,
):
    """Run the server until cancelled; prints a listening line on stdout."""
    manager = SessionManager(max_sessions=max_sessions, default_decimation=decimation)

    async def handler(ws):
        await _handle_connection(ws, manager)

    async with websockets.serve(handler, host, port) as server:
        actual_port = next(iter(server.sockets)).getsockname()[1]
        print(json.dumps({"event": "listening", "host": host, "port": actual_port}), flush=True)
        if ready_callback is not None:
            ready_callback(actual_port)
        await asyncio.Future()


def run_server(port, max_sessions=DEFAULT_MAX_SESSIONS, decimation=DEFAULT_DECIMATION, host="127.0.0.1"):
    try:
        asyncio.run(serve(port, max_sessions, decimation, host))
    except KeyboardInterrupt:
        pass
