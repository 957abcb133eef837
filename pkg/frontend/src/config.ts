/**
 * Config mirrors of the server-side dataclasses. Field names match the
 * Python definitions one-to-one so JSON documents are interchangeable
 * between the CLI, config files, and this client. Angles are radians,
 * distances meters.
 */

export interface ConcatConfig {
  angle_thresh?: number;
  min_points?: number;
  tolerance?: number;
}

export interface EdgeDetectConfig {
  sharpness_thresh?: number;
  cylinder_radius?: number;
  grid_resolution?: number;
  concat?: ConcatConfig;
}

export interface PatchConfig {
  radius?: number;
  max_height_diff?: number;
  n_targets?: number;
  rings?: number;
  ring_points?: number;
  max_attempts?: number | null;
  seed?: number | null;
}

export interface SimPipelineConfig {
  out_width?: number;
  out_height?: number;
  crop?: [number, number, number, number] | null;
  noise_std?: number;
  d_min?: number;
  d_max?: number;
  artifact_count?: number;
  artifact_size?: [number, number];
  artifact_fill?: number | null;
  blur_kernel?: number;
  blur_sigma?: number;
  clip?: [number, number] | null;
  p_ood?: number;
  seed?: number | null;
}

export interface CommandConfig {
  k_v?: number;
  k_omega?: number;
  v_max?: number;
  omega_max?: number;
  turning_fraction?: number;
}

/** Pinhole intrinsics for batched rendering; pose comes per batch row. */
export interface CameraSpec {
  width: number;
  height: number;
  /** horizontal field of view in radians */
  hfov: number;
  vfov?: number;
}
