//! Small planar geometry helpers shared by the generator, renderer and oracle.

pub type P2 = [f64; 2];

#[inline]
pub fn sub(a: P2, b: P2) -> P2 {
    [a[0] - b[0], a[1] - b[1]]
}

#[inline]
pub fn dot(a: P2, b: P2) -> f64 {
    a[0] * b[0] + a[1] * b[1]
}

#[inline]
pub fn cross(a: P2, b: P2) -> f64 {
    a[0] * b[1] - a[1] * b[0]
}

#[inline]
pub fn norm(a: P2) -> f64 {
    dot(a, a).sqrt()
}

pub fn lerp2(a: P2, b: P2, t: f64) -> P2 {
    [a[0] + (b[0] - a[0]) * t, a[1] + (b[1] - a[1]) * t]
}

/// Intersection of segments `p0p1` and `q0q1`.
///
/// Returns the parameters `(t, u)` along each segment. Both are half-open,
/// `[0, 1)`, so a crossing exactly through a shared polyline vertex is
/// reported once. Parallel segments never intersect.
pub fn segment_intersection(p0: P2, p1: P2, q0: P2, q1: P2) -> Option<(f64, f64)> {
    let r = sub(p1, p0);
    let s = sub(q1, q0);
    let denom = cross(r, s);
    if denom.abs() < 1e-15 {
        return None;
    }
    let qp = sub(q0, p0);
    let t = cross(qp, s) / denom;
    let u = cross(qp, r) / denom;
    if (0.0..1.0).contains(&t) && (0.0..1.0).contains(&u) {
        Some((t, u))
    } else {
        None
    }
}

/// Distance from `p` to segment `ab` and the clamped parameter of the
/// closest point.
#[inline]
pub fn point_segment(p: P2, a: P2, b: P2) -> (f64, f64) {
    let ab = sub(b, a);
    let len2 = dot(ab, ab);
    let t = if len2 > 0.0 {
        (dot(sub(p, a), ab) / len2).clamp(0.0, 1.0)
    } else {
        0.0
    };
    let c = lerp2(a, b, t);
    (norm(sub(p, c)), t)
}

/// Cumulative arc length at each vertex.
pub fn arc_lengths(pts: &[P2]) -> Vec<f64> {
    let mut out = Vec::with_capacity(pts.len());
    let mut acc = 0.0;
    out.push(0.0);
    for w in pts.windows(2) {
        acc += norm(sub(w[1], w[0]));
        out.push(acc);
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn crossing_segments_meet_once() {
        let (t, u) = segment_intersection([0.0, 0.0], [2.0, 0.0], [1.0, -1.0], [1.0, 1.0]).unwrap();
        assert!((t - 0.5).abs() < 1e-12 && (u - 0.5).abs() < 1e-12);
        assert!(segment_intersection([0.0, 0.0], [1.0, 0.0], [0.0, 1.0], [1.0, 1.0]).is_none());
    }

    #[test]
    fn shared_endpoint_is_half_open() {
        // touching at p1 is excluded; touching at p0 is included
        assert!(segment_intersection([0.0, 0.0], [1.0, 0.0], [1.0, -1.0], [1.0, 1.0]).is_none());
        assert!(segment_intersection([1.0, 0.0], [2.0, 0.0], [1.0, -1.0], [1.0, 1.0]).is_some());
    }

    #[test]
    fn point_segment_clamps() {
        let (d, t) = point_segment([3.0, 4.0], [0.0, 0.0], [1.0, 0.0]);
        assert_eq!(t, 1.0);
        assert!((d - (4.0f64 + 16.0).sqrt()).abs() < 1e-12);
    }
}
