//! Least-squares intersection of bearing rays.

use super::{AoaError, Result};
use crate::csi::{bearing_to_world_direction, Pose2D};

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Triangulation {
    pub point: [f64; 2],
    /// RMS perpendicular distance from the point to the rays' lines.
    pub rms_residual: f64,
}

/// Point minimizing the summed squared perpendicular distance to every
/// observation's bearing line. Bearings are in each sensor's local frame.
pub fn triangulate(observations: &[(Pose2D, f64)]) -> Result<Triangulation> {
    if observations.len() < 2 {
        return Err(AoaError::Degenerate(format!(
            "need at least 2 bearings, got {}",
            observations.len()
        )));
    }
    // normal equations: sum(n n^T) x = sum(n n^T p)
    let (mut a11, mut a12, mut a22, mut b1, mut b2) = (0.0, 0.0, 0.0, 0.0, 0.0);
    let lines: Vec<([f64; 2], [f64; 2])> = observations
        .iter()
        .map(|(pose, bearing)| {
            let dir = bearing_to_world_direction(pose, *bearing);
            ([pose.x, pose.y], [-dir.sin(), dir.cos()])
        })
        .collect();
    for (p, n) in &lines {
        let np = n[0] * p[0] + n[1] * p[1];
        a11 += n[0] * n[0];
        a12 += n[0] * n[1];
        a22 += n[1] * n[1];
        b1 += n[0] * np;
        b2 += n[1] * np;
    }
    let det = a11 * a22 - a12 * a12;
    let trace = a11 + a22;
    if !(det > 1e-10 * trace * trace) {
        return Err(AoaError::Degenerate(
            "bearing rays are (nearly) parallel".into(),
        ));
    }
    let x = (a22 * b1 - a12 * b2) / det;
    let y = (a11 * b2 - a12 * b1) / det;
    let sq: f64 = lines
        .iter()
        .map(|(p, n)| (n[0] * (x - p[0]) + n[1] * (y - p[1])).powi(2))
        .sum();
    Ok(Triangulation {
        point: [x, y],
        rms_residual: (sq / lines.len() as f64).sqrt(),
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::csi::ground_truth_bearing;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;
    use rand_distr::{Distribution, Normal};

    fn observe(pose: Pose2D, target: [f64; 2]) -> (Pose2D, f64) {
        (pose, ground_truth_bearing(&pose, target).unwrap())
    }

    #[test]
    fn perpendicular_rays_intersect_exactly() {
        let t = [3.0, 4.0];
        let obs = [
            observe(Pose2D::new(0.0, 4.0, 0.7), t),
            observe(Pose2D::new(3.0, -2.0, -1.2), t),
        ];
        let tri = triangulate(&obs).unwrap();
        assert!((tri.point[0] - 3.0).abs() < 1e-9 && (tri.point[1] - 4.0).abs() < 1e-9);
        assert!(tri.rms_residual < 1e-9);
    }

    #[test]
    fn degenerate_inputs() {
        let t = [5.0, 0.0];
        assert!(triangulate(&[observe(Pose2D::new(0.0, 0.0, 0.0), t)]).is_err());
        let parallel = [
            observe(Pose2D::new(0.0, 0.0, 0.0), t),
            observe(Pose2D::new(1.0, 0.0, 0.3), t),
        ];
        assert!(matches!(
            triangulate(&parallel),
            Err(AoaError::Degenerate(_))
        ));
    }

    #[test]
    fn noisy_bearings_residual() {
        let t = [2.0, 6.0];
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        let noise = Normal::new(0.0, 0.05).unwrap();
        let obs: Vec<_> = [[0.0, 0.0], [5.0, 0.0], [5.0, 10.0], [0.0, 10.0]]
            .iter()
            .map(|p| {
                let (pose, b) = observe(Pose2D::new(p[0], p[1], 0.4), t);
                (pose, b + noise.sample(&mut rng))
            })
            .collect();
        let tri = triangulate(&obs).unwrap();
        let err = (tri.point[0] - t[0]).hypot(tri.point[1] - t[1]);
        assert!(err < 1.0, "error {err}");
        assert!(tri.rms_residual > 0.0);
    }
}
