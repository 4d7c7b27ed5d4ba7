/**
 * Mapping between CSS click coordinates and intrinsic image pixels.
 *
 * The snapshot may be displayed at any zoom, so clicks are converted through
 * the element's bounding rect against the image's natural size. Stored marks
 * are integer intrinsic pixels; rendering places the dot at the pixel center,
 * which makes the intrinsic round trip exact.
 */

export interface Point {
  x: number;
  y: number;
}

export interface DisplayGeometry {
  /** Bounding rect of the displayed image, in CSS pixels. */
  left: number;
  top: number;
  width: number;
  height: number;
  /** Intrinsic size of the image file. */
  naturalWidth: number;
  naturalHeight: number;
}

/** Convert a client (CSS) click to intrinsic pixels; null when off-image. */
export function clientToIntrinsic(
  clientX: number,
  clientY: number,
  geom: DisplayGeometry,
): Point | null {
  const dx = clientX - geom.left;
  const dy = clientY - geom.top;
  if (dx < 0 || dy < 0 || dx >= geom.width || dy >= geom.height) {
    return null;
  }
  const scaleX = geom.naturalWidth / geom.width;
  const scaleY = geom.naturalHeight / geom.height;
  const x = Math.min(geom.naturalWidth - 1, Math.floor(dx * scaleX));
  const y = Math.min(geom.naturalHeight - 1, Math.floor(dy * scaleY));
  return { x, y };
}

/** CSS position of the center of an intrinsic pixel. */
export function intrinsicToClient(point: Point, geom: DisplayGeometry): { x: number; y: number } {
  const scaleX = geom.naturalWidth / geom.width;
  const scaleY = geom.naturalHeight / geom.height;
  return {
    x: geom.left + (point.x + 0.5) / scaleX,
    y: geom.top + (point.y + 0.5) / scaleY,
  };
}
