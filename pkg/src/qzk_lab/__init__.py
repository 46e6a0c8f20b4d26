"""
qzk-lab: space-bounded quantum zero-knowledge at desk scale
"""
