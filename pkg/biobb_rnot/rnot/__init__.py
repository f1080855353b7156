name = "rnot"
__all__ = ["train", "evaluate", "transport"]
