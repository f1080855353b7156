name = "core"
__all__ = ["config", "ctransform", "embedding", "errors", "evaluation", "geometry", "measures", "network", "optim",
           "rcpm", "semidual"]
