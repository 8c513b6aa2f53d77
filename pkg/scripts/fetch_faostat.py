"""Download the FAOSTAT food balance bulk files (optional, needs network).

    python scripts/fetch_faostat.py DEST_DIR

Fetches the normalized (long layout) exports of the historic and current
food balance sheets and unzips them into DEST_DIR. Point HDBI_FAOSTAT_DIR
at that folder to enable the full-data check in the test suite. Nothing
in the package or the default test run touches the network.
"""
import argparse
import sys
import urllib.request
import zipfile
from pathlib import Path

BASE = "https://bulks-faostat.fao.org/production/"
FILES = (
    "FoodBalanceSheetsHistoric_E_All_Data_(Normalized).zip",
    "FoodBalanceSheets_E_All_Data_(Normalized).zip",
)


def fetch(dest: Path, base: str = BASE) -> list[Path]:
    dest.mkdir(parents=True, exist_ok=True)
    out = []
    for name in FILES:
        target = dest / name
        if not target.exists():
            print(f"downloading {base + name}", file=sys.stderr)
            urllib.request.urlretrieve(base + urllib.request.quote(name), target)
        with zipfile.ZipFile(target) as z:
            for member in z.namelist():
                if member.endswith(".csv") and "Normalized" in member:
                    z.extract(member, dest)
                    out.append(dest / member)
    return out


def main(argv=None):
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("dest", type=Path)
    ap.add_argument("--base-url", default=BASE)
    args = ap.parse_args(argv)
    for p in fetch(args.dest, args.base_url):
        print(p)


if __name__ == "__main__":
    main()
