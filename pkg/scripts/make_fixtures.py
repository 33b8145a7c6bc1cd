"""Regenerate the committed synthetic fixtures in tests/fixtures.

All three are 64x64 with structure the solver's assumptions hold for:
periodic_64 tiles an 8-pixel sinusoid, edges_64 switches stripe
orientation at mid-height, color_64 phase-shifts the same stripe
pattern per channel. Run: python3 scripts/make_fixtures.py
"""

from pathlib import Path

import numpy as np

from marlow.image import Image, save_image

FIXTURES = Path(__file__).resolve().parent.parent / "tests" / "fixtures"


def periodic_64() -> Image:
    _, xx = np.mgrid[0:64, 0:64]
    return Image(0.5 + 0.45 * np.sin(2 * np.pi * xx / 8))


def edges_64() -> Image:
    yy, xx = np.mgrid[0:64, 0:64]
    top = np.clip(1.5 * np.sin(2 * np.pi * (xx + yy) / 8) + 0.5, 0.05, 0.95)
    bottom = np.clip(1.5 * np.sin(2 * np.pi * (xx - yy) / 8) + 0.5, 0.05, 0.95)
    return Image(np.where(yy < 32, top, bottom))


def color_64() -> Image:
    _, xx = np.mgrid[0:64, 0:64]
    planes = [0.5 + 0.45 * np.sin(2 * np.pi * xx / 8 + phase) for phase in (0.0, 0.9, 1.8)]
    return Image(np.clip(np.stack(planes, axis=2), 0.0, 1.0))


def main() -> None:
    FIXTURES.mkdir(parents=True, exist_ok=True)
    for name, build in (
        ("periodic_64.png", periodic_64),
        ("edges_64.png", edges_64),
        ("color_64.png", color_64),
    ):
        save_image(build(), FIXTURES / name)
        print(f"wrote {FIXTURES / name}")


if __name__ == "__main__":
    main()
