import asyncio
import inspect
import logging
from collections import defaultdict

logger = logging.getLogger(__name__)


class EventBus:
    """A simple, in-process event bus for decoupling pipeline stages, with async support."""

    def __init__(self):
        self._subscribers = defaultdict(list)

    def subscribe(self, event_name: str, callback):
        logger.debug(f"[EventBus] Subscribing '{getattr(callback, '__name__', 'lambda')}' to event '{event_name}'")
        self._subscribers[event_name].append(callback)

    def emit(self, event_name: str, *args, **kwargs):
        """
        Emits an event, calling all subscribed callbacks with the given arguments.
        Coroutine callbacks are scheduled on the running loop, or run to
        completion when no loop is running.
        """
        if event_name != "log_message_received":
            logger.debug(f"[EventBus] Emitting event '{event_name}'")

        for callback in self._subscribers.get(event_name, []):
            try:
                if inspect.iscoroutinefunction(callback):
                    try:
                        asyncio.get_running_loop().create_task(callback(*args, **kwargs))
                    except RuntimeError:
                        asyncio.run(callback(*args, **kwargs))
                else:
                    callback(*args, **kwargs)
            except Exception as e:
                logger.error(f"[EventBus] Exception in callback for event '{event_name}': {e}")
