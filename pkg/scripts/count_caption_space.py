"""Count distinct captions per object for each keyframe count, by enumeration and closed form."""

import argparse

from motionpairs.captions import caption_space_product, count_caption_space


def main():
    ap = argparse.ArgumentParser(description=__doc__)
    ap.add_argument("--max-keyframes", type=int, default=3)
    ap.add_argument("--include-static", action="store_true", help="also count 'pauses' and no-rotation options")
    ap.add_argument("--limit", type=int, default=20_000_000, help="largest space to enumerate")
    args = ap.parse_args()
    print("K  closed_form  enumerated")
    for k in range(2, args.max_keyframes + 1):
        closed = caption_space_product(k, include_static=args.include_static)
        try:
            counted = count_caption_space(k, include_static=args.include_static, limit=args.limit)
        except ValueError:
            counted = "skipped"
        print(f"{k}  {closed:>11}  {counted:>10}")


if __name__ == "__main__":
    main()
