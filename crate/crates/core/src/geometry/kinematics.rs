use crate::error::{Error, Result};
use crate::geometry::wrap_angle;
use crate::scenario::Trajectory;

/// Default smoothing window, in samples.
pub const DEFAULT_WINDOW: usize = 3;

/// Finite-difference derivatives of a trajectory, one value per step.
#[derive(Clone, Debug, Default, PartialEq)]
pub struct KinematicProfile {
    /// Longitudinal acceleration, m/s².
    pub accel: Vec<f64>,
    /// Lateral acceleration (speed × heading rate), m/s².
    pub lat_accel: Vec<f64>,
    /// Longitudinal jerk, m/s³.
    pub jerk: Vec<f64>,
    /// Heading rate, rad/s.
    pub yaw_rate: Vec<f64>,
    /// Angular jerk (derivative of heading rate), rad/s².
    pub yaw_accel: Vec<f64>,
    /// Deceleration magnitude `max(0, -accel)`, m/s².
    pub decel: Vec<f64>,
}

impl KinematicProfile {
    pub fn len(&self) -> usize {
        self.accel.len()
    }

    pub fn is_empty(&self) -> bool {
        self.accel.is_empty()
    }
}

/// Wraps a heading increment into (−π, π].
pub fn unwrap_increment(delta: f64) -> f64 {
    wrap_angle(delta)
}

/// Differentiates speed and heading of `traj` at the fixed 0.1 s step.
///
/// Each derivative is smoothed by a centered moving average of `window`
/// samples, truncated at the ends. Boundary samples use one-sided
/// differences so every output has the input's length.
pub fn kinematics(traj: &Trajectory, window: usize) -> Result<KinematicProfile> {
    let n = traj.len();
    if n < 3 {
        return Err(Error::InsufficientFrames { needed: 3, got: n });
    }
    if window == 0 || window.is_multiple_of(2) {
        return Err(Error::Config(format!("smoothing window must be odd, got {window}")));
    }
    let dt = traj.dt();
    let states = traj.states();

    let speed: Vec<f64> = states.iter().map(|s| s.speed).collect();
    let mut heading = Vec::with_capacity(n);
    heading.push(states[0].heading);
    for i in 1..n {
        let prev = heading[i - 1];
        heading.push(prev + unwrap_increment(states[i].heading - states[i - 1].heading));
    }

    let accel = smooth(&gradient(&speed, dt), window);
    let jerk = smooth(&gradient(&accel, dt), window);
    let yaw_rate = smooth(&gradient(&heading, dt), window);
    let yaw_accel = smooth(&gradient(&yaw_rate, dt), window);
    let lat_accel = speed.iter().zip(&yaw_rate).map(|(v, w)| v * w).collect();
    let decel = accel.iter().map(|a| (-a).max(0.0)).collect();

    Ok(KinematicProfile { accel, lat_accel, jerk, yaw_rate, yaw_accel, decel })
}

/// Central differences in the interior, one-sided at both ends.
pub(crate) fn gradient(values: &[f64], dt: f64) -> Vec<f64> {
    let n = values.len();
    match n {
        0 => vec![],
        1 => vec![0.0],
        _ => (0..n)
            .map(|i| {
                if i == 0 {
                    (values[1] - values[0]) / dt
                } else if i == n - 1 {
                    (values[n - 1] - values[n - 2]) / dt
                } else {
                    (values[i + 1] - values[i - 1]) / (2.0 * dt)
                }
            })
            .collect(),
    }
}

pub(crate) fn smooth(values: &[f64], window: usize) -> Vec<f64> {
    let half = window / 2;
    let n = values.len();
    (0..n)
        .map(|i| {
            let lo = i.saturating_sub(half);
            let hi = (i + half).min(n - 1);
            values[lo..=hi].iter().sum::<f64>() / (hi - lo + 1) as f64
        })
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::scenario::{TrajectoryState, DT};
    use std::f64::consts::PI;

    fn traj(f: impl Fn(usize) -> TrajectoryState, n: usize) -> Trajectory {
        Trajectory::new((0..n).map(f).collect()).unwrap()
    }

    #[test]
    fn constant_speed_line_has_zero_derivatives() {
        let t = traj(
            |i| TrajectoryState { x: 1.5 * i as f64, y: 0.0, heading: 0.3, speed: 15.0 },
            50,
        );
        let k = kinematics(&t, 3).unwrap();
        for i in 0..50 {
            assert_eq!(k.accel[i], 0.0);
            assert_eq!(k.jerk[i], 0.0);
            assert_eq!(k.yaw_rate[i], 0.0);
            assert_eq!(k.yaw_accel[i], 0.0);
        }
    }

    #[test]
    fn linear_speed_ramp() {
        // 0 -> 10 m/s over 50 samples: raw forward difference is 10/49 per step.
        let t = traj(
            |i| TrajectoryState { x: 0.0, y: 0.0, heading: 0.0, speed: 10.0 * i as f64 / 49.0 },
            50,
        );
        let k = kinematics(&t, 3).unwrap();
        let raw: Vec<f64> = (1..50)
            .map(|i| (t.states()[i].speed - t.states()[i - 1].speed) / DT)
            .collect();
        let expected = 10.0 / 4.9;
        for r in &raw {
            assert!((r - expected).abs() < 1e-9);
        }
        for i in 1..49 {
            assert!((k.accel[i] - expected).abs() < 1e-9, "a[{i}] = {}", k.accel[i]);
            assert!(k.jerk[i].abs() < 1e-9);
        }
        assert!((expected - 2.0408163265306123).abs() < 1e-12);
    }

    #[test]
    fn heading_seam_does_not_spike() {
        let rate = 0.5; // rad/s
        let t = traj(
            |i| {
                let h = PI - 1.0 + rate * DT * i as f64;
                TrajectoryState { x: 0.0, y: 0.0, heading: wrap_angle(h), speed: 4.0 }
            },
            50,
        );
        let k = kinematics(&t, 3).unwrap();
        for i in 0..50 {
            assert!((k.yaw_rate[i] - rate).abs() < 1e-9, "psi_dot[{i}] = {}", k.yaw_rate[i]);
            assert!((k.lat_accel[i] - 2.0).abs() < 1e-9);
            assert!(k.yaw_accel[i].abs() < 1e-9);
        }
    }

    #[test]
    fn too_short_is_rejected() {
        let t = traj(|i| TrajectoryState { x: i as f64, y: 0.0, heading: 0.0, speed: 1.0 }, 2);
        assert!(matches!(
            kinematics(&t, 3),
            Err(Error::InsufficientFrames { needed: 3, got: 2 })
        ));
    }

    #[test]
    fn even_window_is_rejected() {
        let t = traj(|i| TrajectoryState { x: i as f64, y: 0.0, heading: 0.0, speed: 1.0 }, 5);
        assert!(kinematics(&t, 2).is_err());
    }

    #[test]
    fn smoothing_truncates_at_boundaries() {
        assert_eq!(smooth(&[0.0, 3.0, 6.0, 0.0], 3), vec![1.5, 3.0, 3.0, 3.0]);
        assert_eq!(smooth(&[1.0, 2.0], 1), vec![1.0, 2.0]);
    }
}
