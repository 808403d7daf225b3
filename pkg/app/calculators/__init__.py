from .metrics import MatchCalculator
from .parser import ResponseParser
from .rewards import RewardCalculator

__all__ = ["MatchCalculator", "ResponseParser", "RewardCalculator"]
