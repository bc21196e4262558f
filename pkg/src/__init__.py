"""NewHope backdoor lab: key exchange, reconciliation and trapdoored-generator recovery."""

__version__ = "1.0.0"
