"""Regenerate the grayscale test images under testdata/images from scikit-image's bundled samples."""
import os

import numpy as np
from PIL import Image
from skimage import color, data

OUT = os.path.join(os.path.dirname(__file__), "..", "testdata", "images")
MAX_SIDE = 512

SOURCES = {
    "camera": data.camera,
    "astronaut": data.astronaut,
    "coffee": data.coffee,
    "chelsea": data.chelsea,
    "coins": data.coins,
    "moon": data.moon,
    "rocket": data.rocket,
    "motorcycle": lambda: data.stereo_motorcycle()[0],
    "retina": data.retina,
    "clock": data.clock,
}


def to_gray(img):
    if img.ndim == 3:
        img = color.rgb2gray(img[..., :3]) * 255.0
    return np.clip(np.round(img.astype(np.float64)), 0, 255).astype(np.uint8)


def main():
    os.makedirs(OUT, exist_ok=True)
    for name, load in SOURCES.items():
        im = Image.fromarray(to_gray(load()), mode="L")
        scale = MAX_SIDE / max(im.size)
        if scale < 1.0:
            im = im.resize((round(im.width * scale), round(im.height * scale)), Image.BOX)
        im.save(os.path.join(OUT, f"{name}.png"), optimize=True)
        print(name, im.size)


if __name__ == "__main__":
    main()
