import { PerspectiveCamera, Vector3 } from "three";

const DEG = Math.PI / 180;

/** Fixed initial view: front-elevated three-quarter, identical every item. */
export const DEFAULT_AZIMUTH = 45 * DEG;
export const DEFAULT_ELEVATION = 25 * DEG;
export const DEFAULT_RADIUS = 3.0;

const MIN_RADIUS = 0.8;
const MAX_RADIUS = 12.0;
const MAX_ELEVATION = 88 * DEG;

/** One orbit pose mirrored across every registered viewport camera.
 *
 * Alignment judgments require identical viewing directions, so a drag in any
 * viewport re-poses all cameras before the next frame.
 */
export class SharedCamera {
  private azimuth = DEFAULT_AZIMUTH;
  private elevation = DEFAULT_ELEVATION;
  private radius = DEFAULT_RADIUS;
  private readonly target = new Vector3(0, 0, 0);
  private readonly cameras: PerspectiveCamera[] = [];

  register(camera: PerspectiveCamera): void {
    this.cameras.push(camera);
    this.pose(camera);
  }

  /** Swap in a new item's viewport cameras and restore the fixed initial view. */
  setCameras(cameras: PerspectiveCamera[]): void {
    this.cameras.length = 0;
    this.cameras.push(...cameras);
    this.reset();
  }

  orbit(dAzimuth: number, dElevation: number): void {
    this.azimuth += dAzimuth;
    this.elevation = Math.min(MAX_ELEVATION, Math.max(-MAX_ELEVATION, this.elevation + dElevation));
    this.apply();
  }

  zoom(factor: number): void {
    this.radius = Math.min(MAX_RADIUS, Math.max(MIN_RADIUS, this.radius * factor));
    this.apply();
  }

  reset(): void {
    this.azimuth = DEFAULT_AZIMUTH;
    this.elevation = DEFAULT_ELEVATION;
    this.radius = DEFAULT_RADIUS;
    this.apply();
  }

  private pose(camera: PerspectiveCamera): void {
    const ce = Math.cos(this.elevation);
    camera.position.set(
      this.target.x + this.radius * ce * Math.cos(this.azimuth),
      this.target.y + this.radius * ce * Math.sin(this.azimuth),
      this.target.z + this.radius * Math.sin(this.elevation),
    );
    camera.up.set(0, 0, 1); // canonical frame keeps +z up
    camera.lookAt(this.target);
    camera.updateMatrixWorld(true);
  }

  apply(): void {
    for (const camera of this.cameras) this.pose(camera);
  }
}
