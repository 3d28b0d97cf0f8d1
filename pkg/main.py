import logging
from pathlib import Path

from rich.logging import RichHandler

from src.config.settings import settings

# Configure logging
Path(settings.LOG_FILE).parent.mkdir(parents=True, exist_ok=True)
logging.basicConfig(
    level=settings.LOG_LEVEL.upper(),
    format="%(asctime)s - %(name)s - %(levelname)s - %(message)s",
    handlers=[
        RichHandler(rich_tracebacks=True),
        logging.FileHandler(settings.LOG_FILE)
    ]
)

from src.cli.commands import app, console  # noqa: E402

logger = logging.getLogger("palm")


def main() -> None:
    """Entry point"""
    try:
        app()
    except KeyboardInterrupt:
        console.print("\n[yellow]Interrupted[/yellow]")
        logger.warning("Interrupted by user")
        raise SystemExit(130)


if __name__ == "__main__":
    main()
