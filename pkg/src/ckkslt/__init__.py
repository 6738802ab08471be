"""RNS-CKKS homomorphic linear transforms at desk scale.

Toy-parameter implementation of hoisted baby-step giant-step linear
transform evaluators over RNS-CKKS, with analytical complexity and
memory-traffic models and an event-counting datapath simulator.

NOT FOR PRODUCTION CRYPTOGRAPHY: parameters are sized for testing
algorithmic claims, not for security.
"""

__version__ = "0.1.0"
