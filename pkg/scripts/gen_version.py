from pathlib import Path
import tomllib

ROOT = Path(__file__).resolve().parents[1]
PYPROJECT = ROOT / "pyproject.toml"
OUT = ROOT / "src/qzk_lab/__version__.py"


def main() -> None:
    project = tomllib.loads(PYPROJECT.read_text())["project"]
    version = project["version"]
    author = project["authors"][0]["name"]

    OUT.write_text(
        f'''"""
Auto-generated by scripts/gen_version.py from pyproject.toml. DO NOT EDIT.
"""
__title__ = "{project["name"]}"
__version__ = "{version}"
__author__ = "{author}"
'''
    )

    print(f"Generated {OUT.relative_to(ROOT)} ({project['name']} {version})")


if __name__ == "__main__":
    main()
