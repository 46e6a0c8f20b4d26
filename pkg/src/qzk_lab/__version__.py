"""
Auto-generated by scripts/gen_version.py from pyproject.toml. DO NOT EDIT.
"""
__title__ = "qzk-lab"
__version__ = "0.1.0"
__author__ = "Frank1o3"
