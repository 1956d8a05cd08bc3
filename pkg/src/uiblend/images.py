"""Image decoding and cropping for example screenshots."""

from __future__ import annotations

import io

from PIL import Image, UnidentifiedImageError

from .errors import UnsupportedImage
from .model import JPEG_MAGIC, PNG_MAGIC, CropRegion, ScreenImage


def sniff_media_type(payload: bytes) -> str:
    if payload.startswith(PNG_MAGIC):
        return "png"
    if payload.startswith(JPEG_MAGIC):
        return "jpeg"
    raise UnsupportedImage("payload is neither png nor jpeg")


def load_screen_image(image_id: str, payload: bytes) -> ScreenImage:
    """Decode an uploaded payload and record its dimensions."""
    media_type = sniff_media_type(payload)
    try:
        with Image.open(io.BytesIO(payload)) as im:
            width, height = im.size
    except UnidentifiedImageError as exc:
        raise UnsupportedImage(f"undecodable image payload: {exc}") from exc
    return ScreenImage(
        id=image_id, bytes=payload, media_type=media_type,
        width_px=width, height_px=height,
    )


def crop_image(img: ScreenImage, region: CropRegion) -> ScreenImage:
    """Cut ``region`` out of ``img``.

    The result is always encoded as png so the cropped pixels stay exactly
    equal to the source rectangle (jpeg re-encoding would not be lossless).
    """
    region.validate_for(img)
    if (region.x, region.y, region.w, region.h) == (0, 0, img.width_px, img.height_px):
        return img
    with Image.open(io.BytesIO(img.bytes)) as im:
        cropped = im.crop((region.x, region.y, region.x + region.w, region.y + region.h))
        buf = io.BytesIO()
        cropped.save(buf, format="PNG")
    return ScreenImage(
        id=f"{img.id}:crop:{region.x},{region.y},{region.w},{region.h}",
        bytes=buf.getvalue(),
        media_type="png",
        width_px=region.w,
        height_px=region.h,
    )
