use crate::geometry::Vec2;

/// Returned when the range is not shrinking.
pub const TTC_CAP: f64 = 1e6;

/// Constant-velocity time to collision: range divided by the rate at
/// which the range is closing. Capped at [`TTC_CAP`]; zero at zero range.
pub fn time_to_collision(ego_pos: Vec2, ego_vel: Vec2, other_pos: Vec2, other_vel: Vec2) -> f64 {
    let dp = other_pos - ego_pos;
    let dv = other_vel - ego_vel;
    let range = dp.norm();
    if range == 0.0 {
        return 0.0;
    }
    let closing = -dp.dot(dv) / range;
    if !(closing > 0.0) {
        return TTC_CAP;
    }
    (range / closing).min(TTC_CAP)
}
