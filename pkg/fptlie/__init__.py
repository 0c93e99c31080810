# fptlie - First-passage time densities through Lie symmetries of the Fokker-Planck equation
__version__ = "1.0.0"
