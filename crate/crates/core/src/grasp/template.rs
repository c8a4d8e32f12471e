//! Parallel-jaw gripper templates.
//!
//! A template is a pair of binary stencils centred on the grasp point, drawn
//! with the closing axis along +u. The *contact* stencil marks the two pads
//! that touch the object once the fingers close; the *collision* stencil
//! marks the open fingers, which must descend into free space.

use std::f64::consts::{FRAC_PI_2, PI};

use serde::{Deserialize, Serialize};

use crate::{Error, Result};

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(try_from = "Vec<String>", into = "Vec<String>")]
pub struct Mask {
    pub width: usize,
    pub height: usize,
    pub cells: Vec<bool>,
}

impl Mask {
    pub fn new(width: usize, height: usize) -> Self {
        Self { width, height, cells: vec![false; width * height] }
    }

    pub fn get(&self, x: usize, y: usize) -> bool {
        self.cells[y * self.width + x]
    }

    pub fn set(&mut self, x: usize, y: usize, on: bool) {
        self.cells[y * self.width + x] = on;
    }

    fn center(&self) -> (i32, i32) {
        ((self.width / 2) as i32, (self.height / 2) as i32)
    }

    /// Is the cell at centred offset `(dx, dy)` set?
    pub fn at(&self, dx: i32, dy: i32) -> bool {
        let (cx, cy) = self.center();
        let (x, y) = (cx + dx, cy + dy);
        x >= 0 && y >= 0 && (x as usize) < self.width && (y as usize) < self.height && self.get(x as usize, y as usize)
    }

    /// Set cells as offsets from the centre, row-major.
    pub fn offsets(&self) -> Vec<(i32, i32)> {
        let (cx, cy) = self.center();
        let mut out = Vec::new();
        for y in 0..self.height {
            for x in 0..self.width {
                if self.get(x, y) {
                    out.push((x as i32 - cx, y as i32 - cy));
                }
            }
        }
        out
    }

    pub fn count(&self) -> usize {
        self.cells.iter().filter(|&&c| c).count()
    }

    /// Number of 8-connected components of set cells.
    pub fn components(&self) -> usize {
        let mut seen = vec![false; self.cells.len()];
        let mut n = 0;
        for start in 0..self.cells.len() {
            if !self.cells[start] || seen[start] {
                continue;
            }
            n += 1;
            let mut stack = vec![start];
            seen[start] = true;
            while let Some(i) = stack.pop() {
                let (x, y) = ((i % self.width) as i64, (i / self.width) as i64);
                for dy in -1..=1 {
                    for dx in -1..=1 {
                        let (nx, ny) = (x + dx, y + dy);
                        if nx < 0 || ny < 0 || nx >= self.width as i64 || ny >= self.height as i64 {
                            continue;
                        }
                        let j = ny as usize * self.width + nx as usize;
                        if self.cells[j] && !seen[j] {
                            seen[j] = true;
                            stack.push(j);
                        }
                    }
                }
            }
        }
        n
    }
}

impl TryFrom<Vec<String>> for Mask {
    type Error = String;

    fn try_from(rows: Vec<String>) -> std::result::Result<Self, String> {
        let height = rows.len();
        let width = rows.first().map(|r| r.len()).unwrap_or(0);
        if height == 0 || width == 0 {
            return Err("empty mask".into());
        }
        if height % 2 == 0 || width % 2 == 0 {
            return Err(format!("mask must have odd dimensions, got {width}x{height}"));
        }
        let mut cells = Vec::with_capacity(width * height);
        for (i, row) in rows.iter().enumerate() {
            if row.len() != width {
                return Err(format!("mask row {i} has length {}, expected {width}", row.len()));
            }
            for ch in row.chars() {
                cells.push(match ch {
                    '1' | '#' => true,
                    '0' | '.' => false,
                    other => return Err(format!("bad mask character {other:?}")),
                });
            }
        }
        Ok(Mask { width, height, cells })
    }
}

impl From<Mask> for Vec<String> {
    fn from(m: Mask) -> Self {
        (0..m.height)
            .map(|y| (0..m.width).map(|x| if m.get(x, y) { '1' } else { '0' }).collect())
            .collect()
    }
}

/// Physical jaw dimensions used to rasterise a template.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct JawGeometry {
    /// Opening between the fingers before closing.
    pub finger_gap_mm: f64,
    /// Finger extent across the closing axis.
    pub finger_width_mm: f64,
    pub finger_thickness_mm: f64,
    /// Depth of each contact pad, measured outward from the grasp axis.
    pub pad_depth_mm: f64,
}

impl Default for JawGeometry {
    fn default() -> Self {
        Self {
            finger_gap_mm: 30.0,
            finger_width_mm: 12.0,
            finger_thickness_mm: 6.0,
            pad_depth_mm: 3.0,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct GripperTemplate {
    pub contact_mask: Mask,
    pub collision_mask: Mask,
    /// Metres.
    pub finger_gap: f64,
    /// Millimetres per pixel.
    pub template_resolution: f64,
}

impl GripperTemplate {
    pub fn parallel_jaw(geom: &JawGeometry, mm_per_pixel: f64) -> Result<Self> {
        let px = |mm: f64| (mm / mm_per_pixel).round() as i32;
        let gap_half = px(geom.finger_gap_mm / 2.0);
        let pad = px(geom.pad_depth_mm).max(1);
        let thick = px(geom.finger_thickness_mm).max(1);
        let half_w = px(geom.finger_width_mm / 2.0).max(0);
        if pad >= gap_half {
            return Err(Error::Config(format!(
                "contact pads ({pad} px) do not fit inside half the finger gap ({gap_half} px) at {mm_per_pixel} mm/px"
            )));
        }
        let reach = gap_half + thick - 1;
        let (w, h) = ((2 * reach + 1) as usize, (2 * half_w + 1) as usize);
        let mut contact = Mask::new(w, h);
        let mut collision = Mask::new(w, h);
        for y in 0..h {
            for x in 0..w {
                let dx = (x as i32 - reach).abs();
                if (1..=pad).contains(&dx) {
                    contact.set(x, y, true);
                } else if (gap_half..=reach).contains(&dx) {
                    collision.set(x, y, true);
                }
            }
        }
        let t = Self {
            contact_mask: contact,
            collision_mask: collision,
            finger_gap: geom.finger_gap_mm / 1000.0,
            template_resolution: mm_per_pixel,
        };
        t.validate()?;
        Ok(t)
    }

    pub fn validate(&self) -> Result<()> {
        let (c, k) = (&self.contact_mask, &self.collision_mask);
        if c.count() == 0 || k.count() == 0 {
            return Err(Error::Config("template masks must be non-empty".into()));
        }
        if c.width != k.width || c.height != k.height {
            return Err(Error::Config("contact and collision masks differ in size".into()));
        }
        if c.cells.iter().zip(&k.cells).any(|(a, b)| *a && *b) {
            return Err(Error::Config("contact and collision masks overlap".into()));
        }
        if c.components() != 2 {
            return Err(Error::Config(format!(
                "contact mask must have exactly two pads, found {} components",
                c.components()
            )));
        }
        if !(self.finger_gap > 0.0 && self.template_resolution > 0.0) {
            return Err(Error::Config("finger_gap and template_resolution must be > 0".into()));
        }
        Ok(())
    }

    /// Non-max-suppression radius: half the finger gap, in pixels.
    pub fn nms_radius_px(&self) -> f64 {
        self.finger_gap * 1000.0 / self.template_resolution / 2.0
    }

    /// Orientation `index` of `n` evenly spaced over `[0, pi)`.
    pub fn rotated_index(&self, index: usize, n: usize) -> RotatedTemplate {
        let phi = index as f64 * PI / n as f64;
        if n % 2 == 0 {
            // split into an exact quarter turn plus a residual below pi/2
            let per_quarter = n / 2;
            let quarters = index / per_quarter;
            let residual = (index % per_quarter) as f64 * PI / n as f64;
            self.rotate(phi, quarters, residual)
        } else {
            self.rotated(phi)
        }
    }

    /// Template rotated by an arbitrary angle.
    pub fn rotated(&self, phi: f64) -> RotatedTemplate {
        let phi = normalize_angle(phi);
        let quarters = (phi / FRAC_PI_2).floor() as usize;
        let residual = phi - quarters as f64 * FRAC_PI_2;
        self.rotate(phi, quarters.min(1), residual.max(0.0))
    }

    /// Contact pads are mapped forward cell by cell, so every orientation
    /// has the same number of contact cells. The collision stencil is
    /// filled by inverse lookup, so it has no holes.
    fn rotate(&self, phi: f64, quarters: usize, residual: f64) -> RotatedTemplate {
        let turn = |mut o: (i32, i32)| {
            for _ in 0..quarters {
                o = (-o.1, o.0);
            }
            o
        };
        let (sn, cs) = residual.sin_cos();
        let mut contact: Vec<(i32, i32)> = self
            .contact_mask
            .offsets()
            .into_iter()
            .map(|(x, y)| {
                let (x, y) = (x as f64, y as f64);
                turn((nearest(x * cs - y * sn), nearest(x * sn + y * cs)))
            })
            .collect();
        contact.sort_unstable_by_key(|&(u, v)| (v, u));
        contact.dedup();

        let reach = {
            let (cx, cy) = self.collision_mask.center();
            ((cx * cx + cy * cy) as f64).sqrt().ceil() as i32 + 1
        };
        let mut collision = Vec::new();
        for dv in -reach..=reach {
            for du in -reach..=reach {
                let x = du as f64 * cs + dv as f64 * sn;
                let y = -(du as f64) * sn + dv as f64 * cs;
                let o = turn((du, dv));
                if self.collision_mask.at(nearest(x), nearest(y)) && contact.binary_search_by_key(&(o.1, o.0), |&(u, v)| (v, u)).is_err() {
                    collision.push(o);
                }
            }
        }
        collision.sort_unstable_by_key(|&(u, v)| (v, u));
        RotatedTemplate { phi, contact, collision }
    }
}

/// Template stencils at one orientation, as pixel offsets `(du, dv)`.
#[derive(Debug, Clone, PartialEq)]
pub struct RotatedTemplate {
    pub phi: f64,
    pub contact: Vec<(i32, i32)>,
    pub collision: Vec<(i32, i32)>,
}

impl RotatedTemplate {
    /// Bounding extents `(min_du, max_du, min_dv, max_dv)` over both stencils
    /// and the centre.
    pub fn extents(&self) -> (i32, i32, i32, i32) {
        self.contact
            .iter()
            .chain(&self.collision)
            .fold((0, 0, 0, 0), |(a, b, c, d), &(u, v)| (a.min(u), b.max(u), c.min(v), d.max(v)))
    }
}

/// Nearest integer, ties away from zero. The coordinate is snapped to
/// 1e-9 first so that exact half-way points round the same way whatever
/// the float noise in the rotation.
pub fn nearest(x: f64) -> i32 {
    ((x * 1e9).round() / 1e9).round() as i32
}

/// Map an angle into `[0, pi)`.
pub fn normalize_angle(phi: f64) -> f64 {
    let r = phi.rem_euclid(PI);
    if r >= PI {
        0.0
    } else {
        r
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn template() -> GripperTemplate {
        GripperTemplate::parallel_jaw(&JawGeometry::default(), 3.0).unwrap()
    }

    #[test]
    fn default_jaw_is_valid_with_two_pads() {
        let t = template();
        assert_eq!(t.contact_mask.components(), 2);
        assert_eq!(t.collision_mask.components(), 2);
        assert_eq!(t.contact_mask.count(), 10);
        assert_eq!(t.contact_mask.width, 13);
        assert_eq!(t.contact_mask.height, 5);
        assert!((t.nms_radius_px() - 5.0).abs() < 1e-12);
    }

    #[test]
    fn quarter_turn_is_exact() {
        let t = template();
        let r0 = t.rotated_index(0, 8);
        let r4 = t.rotated_index(4, 8);
        let mut turned: Vec<(i32, i32)> = r0.contact.iter().map(|&(u, v)| (-v, u)).collect();
        turned.sort_unstable_by_key(|&(u, v)| (v, u));
        assert_eq!(turned, r4.contact);
        // the stencil is point-symmetric, so a half turn maps it to itself
        let mut flipped: Vec<(i32, i32)> = r0.collision.iter().map(|&(u, v)| (-u, -v)).collect();
        flipped.sort_unstable_by_key(|&(u, v)| (v, u));
        assert_eq!(flipped, r0.collision);
    }

    #[test]
    fn rotation_keeps_masks_disjoint() {
        let t = template();
        for i in 0..8 {
            let r = t.rotated_index(i, 8);
            assert!(!r.contact.is_empty());
            assert!(r.contact.iter().all(|o| !r.collision.contains(o)));
        }
    }

    #[test]
    fn invalid_templates_are_rejected() {
        let mut t = template();
        t.contact_mask.cells.iter_mut().for_each(|c| *c = false);
        assert!(t.validate().is_err());

        let mut t = template();
        let rows: Vec<String> = vec!["0001000".into(), "0011100".into(), "0001000".into()];
        t.contact_mask = Mask::try_from(rows).unwrap();
        assert!(t.validate().is_err());

        let geom = JawGeometry { pad_depth_mm: 40.0, ..JawGeometry::default() };
        assert!(GripperTemplate::parallel_jaw(&geom, 3.0).is_err());
    }

    #[test]
    fn template_json_round_trips() {
        let t = template();
        let text = serde_json::to_string(&t).unwrap();
        let back: GripperTemplate = serde_json::from_str(&text).unwrap();
        assert_eq!(back, t);
    }
}
