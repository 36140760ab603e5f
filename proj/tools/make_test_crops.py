#!/usr/bin/env python3
"""Regenerates the desk-scale test crops in tests/data from scikit-image's bundled samples."""
import pathlib

import numpy as np
from skimage import color, data

OUT = pathlib.Path(__file__).resolve().parent.parent / "tests" / "data"


def write_pnm(path, img):
    img = np.ascontiguousarray(img, dtype=np.uint8)
    magic = b"P5" if img.ndim == 2 else b"P6"
    h, w = img.shape[:2]
    with open(path, "wb") as f:
        f.write(magic + b"\n%d %d\n255\n" % (w, h))
        f.write(img.tobytes())


def main():
    OUT.mkdir(parents=True, exist_ok=True)
    cam = data.camera()
    astro_rgb = data.astronaut()
    astro = (color.rgb2gray(astro_rgb) * 255).round().astype(np.uint8)
    write_pnm(OUT / "camera_head.pgm", cam[70:198, 190:318])
    write_pnm(OUT / "camera_tripod.pgm", cam[300:428, 230:358])
    write_pnm(OUT / "astronaut_face.pgm", astro[20:148, 160:288])
    write_pnm(OUT / "astronaut_color.ppm", astro_rgb[60:108, 200:248])


if __name__ == "__main__":
    main()
