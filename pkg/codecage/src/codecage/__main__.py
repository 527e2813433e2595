"""Allow `python3 -m codecage` as an alias for the worker loop."""

from codecage.worker import main

if __name__ == "__main__":
    main()
