name = "biobb_rnot"
__all__ = ["core", "rnot", "rnot_extra"]
__version__ = "1.0.0"
