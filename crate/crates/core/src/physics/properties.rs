use crate::geometry::{intersection_aperture, specific_volume, MixedDimensionalGrid, ProjectionSet};

use super::constitutive::{cubic_law, effective_value};
use super::params::{MaterialParams, PropertyOverrides};
use super::PhysicsError;

/// Fixed per-cell and per-mortar-cell properties in global numbering.
#[derive(Clone, Debug)]
pub struct Properties {
    pub aperture: Vec<f64>,
    pub specific_volume: Vec<f64>,
    pub porosity: Vec<f64>,
    /// Tangential permeability.
    pub permeability: Vec<f64>,
    /// Effective thermal conductivity.
    pub conductivity: Vec<f64>,
    pub normal_permeability: Vec<f64>,
    /// Lower-side effective conductivity on each mortar cell.
    pub normal_conductivity: Vec<f64>,
    /// Specific volume of the higher-dimensional neighbour on each mortar cell.
    pub mortar_specific_volume: Vec<f64>,
}

fn per_subdomain(mdg: &MixedDimensionalGrid, global: &[f64]) -> Vec<Vec<f64>> {
    let off = mdg.cell_offsets();
    mdg.subdomains.iter().enumerate().map(|(i, g)| global[off[i]..off[i] + g.num_cells].to_vec()).collect()
}

pub fn compute_properties(
    mdg: &MixedDimensionalGrid,
    proj: &ProjectionSet,
    params: &MaterialParams,
    overrides: &PropertyOverrides,
) -> Result<Properties, PhysicsError> {
    let n = mdg.ambient_dim;
    let a_frac = overrides.aperture_m.unwrap_or(params.residual_aperture_m);
    let mut apertures: Vec<Vec<f64>> = mdg
        .subdomains
        .iter()
        .map(|g| if g.dim + 1 == n { vec![a_frac; g.num_cells] } else { Vec::new() })
        .collect();
    apertures[0] = vec![1.0; mdg.subdomains[0].num_cells];
    let apertures = intersection_aperture(mdg, &apertures)?;
    let mut perm: Vec<Vec<f64>> = mdg
        .subdomains
        .iter()
        .zip(&apertures)
        .map(|(g, a)| {
            if g.dim == n {
                vec![params.solid.permeability_m2; g.num_cells]
            } else if g.dim + 1 == n {
                a.iter().map(|&a| overrides.fracture_permeability_m2.unwrap_or_else(|| cubic_law(a))).collect()
            } else {
                Vec::new()
            }
        })
        .collect();
    // Intersections average the permeability of their higher-dimensional neighbours.
    let averaged = intersection_aperture(mdg, &perm)?;
    for (i, g) in mdg.subdomains.iter().enumerate() {
        if g.dim + 1 < n {
            perm[i] = match overrides.fracture_permeability_m2 {
                Some(k) => vec![k; g.num_cells],
                None => averaged[i].clone(),
            };
        }
    }
    let mut aperture = Vec::with_capacity(mdg.num_cells_total());
    let mut specvol = Vec::with_capacity(mdg.num_cells_total());
    let mut porosity = Vec::with_capacity(mdg.num_cells_total());
    for (g, a) in mdg.subdomains.iter().zip(&apertures) {
        aperture.extend_from_slice(a);
        specvol.extend(specific_volume(a, g.dim, n)?);
        let phi = if g.dim == n { params.solid.porosity } else { overrides.fracture_porosity.unwrap_or(1.0) };
        if !(phi > 0.0 && phi <= 1.0) {
            return Err(PhysicsError::InvalidParameter(format!("porosity {phi} outside (0, 1]")));
        }
        porosity.extend(std::iter::repeat(phi).take(g.num_cells));
    }
    let permeability: Vec<f64> = perm.concat();
    if let Some(c) = permeability.iter().position(|&k| !(k > 0.0)) {
        return Err(PhysicsError::InvalidParameter(format!("non-positive permeability in cell {c}")));
    }
    let conductivity: Vec<f64> = porosity
        .iter()
        .map(|&phi| effective_value(phi, params.fluid.conductivity_w_m_k, params.solid.conductivity_w_m_k))
        .collect();
    let normal_permeability = match overrides.normal_permeability_m2 {
        Some(k) => vec![k; mdg.num_mortar_cells_total()],
        None => proj.secondary_cell_to_mortar.matvec(&permeability),
    };
    Ok(Properties {
        normal_conductivity: proj.secondary_cell_to_mortar.matvec(&conductivity),
        mortar_specific_volume: proj.primary_cell_to_mortar.matvec(&specvol),
        aperture,
        specific_volume: specvol,
        porosity,
        permeability,
        conductivity,
        normal_permeability,
    })
}

impl Properties {
    pub fn aperture_by_subdomain(&self, mdg: &MixedDimensionalGrid) -> Vec<Vec<f64>> {
        per_subdomain(mdg, &self.aperture)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::geometry::{build_mdg, build_projections, FractureSpec, GeometrySpec};

    #[test]
    fn crossing_fractures_in_3d_units() {
        let mdg = build_mdg(
            &GeometrySpec::unit_box(2, 2)
                .with_fracture(FractureSpec { fixed_axis: 0, fixed_value_m: 0.5, extents_m: vec![[0.0, 1.0]] })
                .with_fracture(FractureSpec { fixed_axis: 1, fixed_value_m: 0.5, extents_m: vec![[0.0, 1.0]] }),
        )
        .unwrap();
        let proj = build_projections(&mdg).unwrap();
        let params = MaterialParams::table();
        let props = compute_properties(&mdg, &proj, &params, &PropertyOverrides::default()).unwrap();
        let a = 5e-4;
        assert_eq!(props.aperture, vec![1.0, 1.0, 1.0, 1.0, a, a, a, a, a]);
        assert_eq!(props.specific_volume[4], a);
        assert_eq!(props.specific_volume[8], a * a);
        assert_eq!(props.permeability[4], a * a / 12.0);
        assert_eq!(props.permeability[8], a * a / 12.0);
        assert_eq!(props.porosity[8], 1.0);
        assert_eq!(props.mortar_specific_volume.len(), mdg.num_mortar_cells_total());
        assert_eq!(*props.mortar_specific_volume.last().unwrap(), a);
    }
}
