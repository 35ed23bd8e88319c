//! Polygon selection over projected coordinates (even-odd rule).

use alloc::string::String;
use alloc::vec::Vec;

use crate::{Error, Result};

/// Even-odd test: casts a ray towards +x and counts edge crossings. Points
/// exactly on an edge may land on either side.
pub fn point_in_polygon(p: [f64; 2], polygon: &[[f64; 2]]) -> bool {
    let mut inside = false;
    let n = polygon.len();
    let mut j = n.wrapping_sub(1);
    for i in 0..n {
        let (xi, yi) = (polygon[i][0], polygon[i][1]);
        let (xj, yj) = (polygon[j][0], polygon[j][1]);
        if (yi > p[1]) != (yj > p[1]) && p[0] < (xj - xi) * (p[1] - yi) / (yj - yi) + xi {
            inside = !inside;
        }
        j = i;
    }
    inside
}

/// Ids whose coordinates fall inside `polygon`, in input order.
pub fn select_in_polygon(ids: &[String], coords: &[[f64; 2]], polygon: &[[f64; 2]]) -> Result<Vec<String>> {
    if polygon.len() < 3 {
        return Err(Error::TooFewSamples {
            required: 3,
            found: polygon.len(),
        });
    }
    if ids.len() != coords.len() {
        return Err(Error::LengthMismatch {
            left: ids.len(),
            right: coords.len(),
        });
    }
    Ok(ids
        .iter()
        .zip(coords)
        .filter(|(_, c)| point_in_polygon(**c, polygon))
        .map(|(id, _)| id.clone())
        .collect())
}
