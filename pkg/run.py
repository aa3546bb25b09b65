"""Simple script to run the command line interface from a checkout"""

from camera_portfolio import cli


if __name__ == "__main__":
    cli.main()
