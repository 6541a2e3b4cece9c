use super::{signed_offset, VehicleState, WorldState};

/// Axis-aligned footprint overlap with ring wrap on the longitudinal axis.
/// Touching edges do not count as overlap.
pub fn footprints_overlap(a: &VehicleState, b: &VehicleState, circumference: f64) -> bool {
    let dx = signed_offset(a.x, b.x, circumference).abs();
    let dy = (a.y - b.y).abs();
    dx < 0.5 * (a.length + b.length) && dy < 0.5 * (a.width + b.width)
}

/// First overlapping pair in index order, as vehicle ids.
pub fn detect_collision(world: &WorldState) -> Option<(usize, usize)> {
    let v = &world.vehicles;
    for i in 0..v.len() {
        for j in (i + 1)..v.len() {
            if footprints_overlap(&v[i], &v[j], world.circumference) {
                return Some((v[i].id, v[j].id));
            }
        }
    }
    None
}
