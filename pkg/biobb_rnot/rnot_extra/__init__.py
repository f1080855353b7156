name = "rnot_extra"
__all__ = ["diagnose_embedding", "sweep", "quantize"]
