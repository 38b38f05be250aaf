from . import compare, evaluate, gen, gradcheck, mine_audit, train

COMMANDS = [gen, train, evaluate, mine_audit, gradcheck, compare]

__all__ = ['COMMANDS']
