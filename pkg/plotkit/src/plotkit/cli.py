"""Entry point: `plotkit <job.json>` renders one figure job."""

import sys

from .render import PlotkitError, load_job, render


def main(argv=None) -> None:
    argv = sys.argv[1:] if argv is None else argv
    if len(argv) != 1 or argv[0] in ("-h", "--help"):
        print("usage: plotkit <job.json>", file=sys.stderr)
        sys.exit(0 if argv and argv[0] in ("-h", "--help") else 2)
    try:
        job = load_job(argv[0])
        png, svg = render(job)
    except FileNotFoundError as exc:
        print(f"error: {exc}", file=sys.stderr)
        sys.exit(2)
    except PlotkitError as exc:
        print(f"error: {exc}", file=sys.stderr)
        sys.exit(1)
    print(png)
    print(svg)


if __name__ == "__main__":
    main()
