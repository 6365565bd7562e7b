// Small pose-math helpers for the dual view: covariance ellipse sizing
// and the truth-vs-estimate error readout.

import { normalizeAngle, Pose } from './cropRender';

/** 2-sigma axis-aligned ellipse semi-axes (mm) from the state cov diagonal
 * (cov_diag[0], cov_diag[1] are position variances in m^2). */
export function covarianceEllipseMm(covDiag: number[]): { rx: number; ry: number } {
  const sx = Math.sqrt(Math.max(0, covDiag[0])) * 1000;
  const sy = Math.sqrt(Math.max(0, covDiag[1])) * 1000;
  return { rx: 2 * sx, ry: 2 * sy };
}

/** Planar distance between two poses in mm. */
export function positionErrorMm(truth: Pose, estimate: Pose): number {
  return Math.hypot(truth.xMm - estimate.xMm, truth.yMm - estimate.yMm);
}

/** Absolute heading difference in radians, wrapped to [0, pi]. */
export function headingErrorRad(truth: Pose, estimate: Pose): number {
  return Math.abs(normalizeAngle(truth.theta - estimate.theta));
}
