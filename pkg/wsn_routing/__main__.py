import sys

import wsn_routing.script_args as _args

from wsn_routing.commands import EXIT_ERROR, EXIT_OK, execute
from wsn_routing.logs import configure_logging


def main(argv: list[str] | None = None) -> int:
    try:
        args = _args.request_and_get_script_arguments(
            "Simulate coverage-aware clustering and multipath routing in a wireless sensor network.", argv
        )
    except SystemExit as e:
        return EXIT_OK if not e.code else EXIT_ERROR
    except Exception:
        return EXIT_ERROR

    try:
        configure_logging("WSN Routing", args.config.logging)
    except Exception as e:
        print(f"Error when configuring logging: {e}")
        return EXIT_ERROR

    return execute(args.manifest, args.config)


if __name__ == "__main__":
    sys.exit(main())
