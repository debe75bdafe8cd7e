"""Regenerate src/hybriddefense/templates.txt from hand-drawn stroke paths.

Run once; the text asset is what the package reads.
"""

from pathlib import Path

import numpy as np
from PIL import Image, ImageDraw

SCALE = 10
SIDE = 28
WIDTH = 2.6  # stroke width in output pixels

# Each digit is a list of strokes; a stroke is a polyline or ("arc", box, start, end).
STROKES = {
    0: [("ellipse", (8.5, 4.5, 19.5, 23.5))],
    1: [[(11, 8), (15, 4.5), (15, 23.5)]],
    2: [("arc", (8.5, 4.5, 19.5, 14), 180, 360), [(19.5, 9.5), (19, 12), (8.5, 23.5), (20, 23.5)]],
    3: [("arc", (9, 4.5, 19, 14), 200, 450), ("arc", (8.5, 14, 19.5, 23.5), 270, 520)],
    4: [[(17, 23.5), (17, 4.5), (8, 17), (21, 17)]],
    5: [[(19, 4.5), (10, 4.5), (9.5, 13)], ("arc", (8.5, 11, 19.5, 23.5), 220, 500)],
    6: [[(18, 5), (14, 5), (10.5, 9), (9, 16)], ("ellipse", (9, 13, 19.5, 23.5))],
    7: [[(8.5, 4.5), (19.5, 4.5), (12.5, 23.5)]],
    8: [("ellipse", (9.5, 4.5, 18.5, 13.5)), ("ellipse", (8.5, 13.5, 19.5, 23.5))],
    9: [("ellipse", (8.5, 4.5, 19, 14.5)), [(19, 9), (18.5, 16), (15, 23.5)]],
}


def render(digit):
    img = Image.new("L", (SIDE * SCALE, SIDE * SCALE), 0)
    draw = ImageDraw.Draw(img)
    w = int(WIDTH * SCALE)
    for stroke in STROKES[digit]:
        if isinstance(stroke, tuple) and stroke[0] == "ellipse":
            draw.ellipse([c * SCALE for c in stroke[1]], outline=255, width=w)
        elif isinstance(stroke, tuple) and stroke[0] == "arc":
            _, box, a0, a1 = stroke
            draw.arc([c * SCALE for c in box], a0, a1, fill=255, width=w)
        else:
            pts = [(x * SCALE, y * SCALE) for x, y in stroke]
            draw.line(pts, fill=255, width=w, joint="curve")
            r = w / 2
            for x, y in pts:
                draw.ellipse([x - r, y - r, x + r, y + r], fill=255)
    small = np.asarray(img.resize((SIDE, SIDE), Image.BOX), dtype=np.float64) / 255
    return (small >= 0.4).astype(int)


def main():
    out = Path(__file__).resolve().parents[1] / "src" / "hybriddefense" / "templates.txt"
    lines = []
    for d in range(10):
        mask = render(d)
        lines.extend("".join(str(v) for v in row) for row in mask)
    out.write_text("\n".join(lines) + "\n")
    print(f"wrote {out}")


if __name__ == "__main__":
    main()
