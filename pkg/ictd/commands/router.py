import argparse

from ictd.commands import demo_command, replay_command, train_command, verify_command

COMMANDS = {
    "verify": verify_command,
    "train": train_command,
    "demo": demo_command,
    "replay": replay_command,
}


def register_commands(parser: argparse.ArgumentParser) -> None:
    subparsers = parser.add_subparsers(dest="command", required=True, metavar="COMMAND")
    for name, module in COMMANDS.items():
        command_parser = subparsers.add_parser(name, help=module.HELP, description=module.HELP)
        module.add_arguments(command_parser)
        command_parser.set_defaults(run=module.run)
