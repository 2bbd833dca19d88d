use super::mdg::MixedDimensionalGrid;
use super::GeometryError;

/// Specific volume `a^(N - d)`, the measure restoring full dimension to a reduced object.
pub fn specific_volume(aperture: &[f64], dim: usize, ambient_dim: usize) -> Result<Vec<f64>, GeometryError> {
    let exponent = ambient_dim.checked_sub(dim).ok_or_else(|| {
        GeometryError::UnsupportedGeometry(format!("subdomain dimension {dim} exceeds ambient {ambient_dim}"))
    })? as i32;
    aperture
        .iter()
        .enumerate()
        .map(|(c, &a)| {
            if a > 0.0 {
                Ok(if exponent == 0 { 1.0 } else { a.powi(exponent) })
            } else {
                Err(GeometryError::NonPositiveAperture { cell: c, value: a })
            }
        })
        .collect()
}

/// Completes per-subdomain apertures on intersections from the fracture apertures.
///
/// `apertures[i]` must be populated for every subdomain of dimension `N - 1` (the
/// matrix entry is ignored). Intersection cells receive, for each higher-dimensional
/// interface, the average of the neighbour apertures over the interface's mortar
/// cells at that cell, and then the mean over those interfaces. Dimensions
/// are processed top-down so that point intersections in 3D see line values.
pub fn intersection_aperture(
    mdg: &MixedDimensionalGrid,
    apertures: &[Vec<f64>],
) -> Result<Vec<Vec<f64>>, GeometryError> {
    let n = mdg.ambient_dim;
    let mut out: Vec<Vec<f64>> = apertures.to_vec();
    out.resize(mdg.num_subdomains(), Vec::new());
    for g in mdg.subdomains.iter().filter(|g| g.dim + 1 == n) {
        if out[g.id].len() != g.num_cells {
            return Err(GeometryError::MissingNeighbourData(format!(
                "fracture {} has {} aperture values for {} cells",
                g.id,
                out[g.id].len(),
                g.num_cells
            )));
        }
    }
    for dim in (0..n.saturating_sub(1)).rev() {
        for g in mdg.subdomains.iter().filter(|g| g.dim == dim) {
            let mut sum = vec![0.0; g.num_cells];
            let mut count = vec![0usize; g.num_cells];
            for &j in &mdg.higher_interfaces[g.id] {
                let m = &mdg.interfaces[j];
                let hg = &mdg.subdomains[m.primary];
                let ha = &out[m.primary];
                if ha.len() != hg.num_cells {
                    return Err(GeometryError::MissingNeighbourData(format!(
                        "no apertures on neighbour {} of subdomain {}",
                        m.primary, g.id
                    )));
                }
                let mut local = vec![0.0; g.num_cells];
                let mut hits = vec![0usize; g.num_cells];
                for mc in &m.cells {
                    let hc = hg.cells_of_face(mc.primary_face)[0].0;
                    local[mc.secondary_cell] += ha[hc];
                    hits[mc.secondary_cell] += 1;
                }
                for c in 0..g.num_cells {
                    if hits[c] > 0 {
                        sum[c] += local[c] / hits[c] as f64;
                        count[c] += 1;
                    }
                }
            }
            let mut vals = Vec::with_capacity(g.num_cells);
            for c in 0..g.num_cells {
                if count[c] == 0 {
                    return Err(GeometryError::MissingNeighbourData(format!(
                        "cell {c} of intersection {} has no higher-dimensional neighbour",
                        g.id
                    )));
                }
                vals.push(sum[c] / count[c] as f64);
            }
            out[g.id] = vals;
        }
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::geometry::{build_mdg, FractureSpec, GeometrySpec};

    #[test]
    fn specific_volume_powers() {
        assert_eq!(specific_volume(&[0.01], 1, 3).unwrap()[0], 0.01_f64.powi(2));
        assert_eq!(specific_volume(&[0.37, 2.0], 3, 3).unwrap(), vec![1.0, 1.0]);
        assert_eq!(specific_volume(&[5e-4], 2, 3).unwrap(), vec![5e-4]);
        assert!(matches!(
            specific_volume(&[0.1, 0.0], 2, 3),
            Err(GeometryError::NonPositiveAperture { cell: 1, .. })
        ));
    }

    fn crossing() -> MixedDimensionalGrid {
        build_mdg(
            &GeometrySpec::unit_box(2, 2)
                .with_fracture(FractureSpec { fixed_axis: 0, fixed_value_m: 0.5, extents_m: vec![[0.0, 1.0]] })
                .with_fracture(FractureSpec { fixed_axis: 1, fixed_value_m: 0.5, extents_m: vec![[0.0, 1.0]] }),
        )
        .unwrap()
    }

    #[test]
    fn mean_of_two_crossing_fractures() {
        let mdg = crossing();
        let a = vec![vec![], vec![0.5; 2], vec![0.3; 2]];
        let out = intersection_aperture(&mdg, &a).unwrap();
        assert!((out[3][0] - 0.4).abs() < 1e-15);
        let same = intersection_aperture(&mdg, &[vec![], vec![0.2; 2], vec![0.2; 2]]).unwrap();
        assert_eq!(same[3], vec![0.2]);
    }

    #[test]
    fn missing_fracture_data() {
        let mdg = crossing();
        let err = intersection_aperture(&mdg, &[vec![], vec![0.5; 2]]).unwrap_err();
        assert!(matches!(err, GeometryError::MissingNeighbourData(_)));
    }

    #[test]
    fn three_fractures_meeting_in_a_line() {
        // Two half-planes x = 0.5 (y below / above 0.5) and the half-plane y = 0.5, x > 0.5.
        let spec = GeometrySpec { ambient_dim: 3, extent_m: vec![1.0; 3], cells: vec![2; 3], fractures: vec![] }
            .with_fracture(FractureSpec { fixed_axis: 0, fixed_value_m: 0.5, extents_m: vec![[0.0, 0.5], [0.0, 1.0]] })
            .with_fracture(FractureSpec { fixed_axis: 0, fixed_value_m: 0.5, extents_m: vec![[0.5, 1.0], [0.0, 1.0]] })
            .with_fracture(FractureSpec { fixed_axis: 1, fixed_value_m: 0.5, extents_m: vec![[0.5, 1.0], [0.0, 1.0]] });
        let mdg = build_mdg(&spec).unwrap();
        assert_eq!(mdg.subdomain_dims(), vec![3, 2, 2, 2, 1]);
        assert_eq!(mdg.higher_interfaces[4].len(), 3);
        let a = vec![vec![], vec![1.0; 2], vec![2.0; 2], vec![6.0; 2]];
        let out = intersection_aperture(&mdg, &a).unwrap();
        assert!(out[4].iter().all(|&v| (v - 3.0).abs() < 1e-15));
    }
}
