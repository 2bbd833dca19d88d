use crate::sparse::CsrMatrix;

use super::mdg::MixedDimensionalGrid;
use super::GeometryError;

/// Projection matrices of a single interface, in local subdomain numbering.
#[derive(Clone, Debug)]
pub struct InterfaceProjections {
    /// Face quantities of the primary grid onto mortar cells (`mortar x primary faces`).
    pub primary_face_to_mortar: CsrMatrix,
    /// Mortar quantities onto the matched primary faces (`primary faces x mortar`).
    pub mortar_to_primary_face: CsrMatrix,
    /// Cell quantities of the primary grid onto mortar cells via the face's cell.
    pub primary_cell_to_mortar: CsrMatrix,
    pub secondary_cell_to_mortar: CsrMatrix,
    /// Sums the mortar cells of all sides onto each secondary cell.
    pub mortar_to_secondary_int: CsrMatrix,
    /// Averages the mortar cells of all sides onto each secondary cell.
    pub mortar_to_secondary_avg: CsrMatrix,
}

/// Projections of every interface, plus versions in mixed-dimensional global numbering
/// (cells, faces and mortar cells concatenated in subdomain/interface order).
#[derive(Clone, Debug)]
pub struct ProjectionSet {
    pub interfaces: Vec<InterfaceProjections>,
    pub primary_face_to_mortar: CsrMatrix,
    pub mortar_to_primary_face: CsrMatrix,
    pub primary_cell_to_mortar: CsrMatrix,
    pub secondary_cell_to_mortar: CsrMatrix,
    pub mortar_to_secondary_int: CsrMatrix,
    pub mortar_to_secondary_avg: CsrMatrix,
}

pub fn build_projections(mdg: &MixedDimensionalGrid) -> Result<ProjectionSet, GeometryError> {
    let cell_off = mdg.cell_offsets();
    let face_off = mdg.face_offsets();
    let mortar_off = mdg.mortar_offsets();
    let (nc, nf, nm) = (mdg.num_cells_total(), mdg.num_faces_total(), mdg.num_mortar_cells_total());

    let mut local = Vec::with_capacity(mdg.interfaces.len());
    let mut g_face = Vec::new();
    let mut g_pcell = Vec::new();
    let mut g_scell = Vec::new();
    let mut g_avg = Vec::new();
    for (j, m) in mdg.interfaces.iter().enumerate() {
        let hg = &mdg.subdomains[m.primary];
        let lg = &mdg.subdomains[m.secondary];
        let n = m.num_cells();
        let mut face = Vec::with_capacity(n);
        let mut pcell = Vec::with_capacity(n);
        let mut scell = Vec::with_capacity(n);
        let mut per_secondary = vec![0usize; lg.num_cells];
        for mc in &m.cells {
            per_secondary[mc.secondary_cell] += 1;
        }
        let mut avg = Vec::with_capacity(n);
        for (k, mc) in m.cells.iter().enumerate() {
            let inc = hg.cells_of_face(mc.primary_face);
            if inc.len() != 1 {
                return Err(GeometryError::MatchingFailure(format!(
                    "mortar cell {k} of interface {j}: face {} is not a split face",
                    mc.primary_face
                )));
            }
            face.push((k, mc.primary_face, 1.0));
            pcell.push((k, inc[0].0, 1.0));
            scell.push((k, mc.secondary_cell, 1.0));
            avg.push((mc.secondary_cell, k, 1.0 / per_secondary[mc.secondary_cell] as f64));
        }
        let xi_face = CsrMatrix::from_triplets(n, hg.num_faces, &face);
        let xi_scell = CsrMatrix::from_triplets(n, lg.num_cells, &scell);
        let (mo, fo, hco, lco) = (mortar_off[j], face_off[m.primary], cell_off[m.primary], cell_off[m.secondary]);
        g_face.extend(face.iter().map(|&(k, f, v)| (k + mo, f + fo, v)));
        g_pcell.extend(pcell.iter().map(|&(k, c, v)| (k + mo, c + hco, v)));
        g_scell.extend(scell.iter().map(|&(k, c, v)| (k + mo, c + lco, v)));
        g_avg.extend(avg.iter().map(|&(c, k, v)| (c + lco, k + mo, v)));
        local.push(InterfaceProjections {
            mortar_to_primary_face: xi_face.transpose(),
            primary_face_to_mortar: xi_face,
            primary_cell_to_mortar: CsrMatrix::from_triplets(n, hg.num_cells, &pcell),
            mortar_to_secondary_int: xi_scell.transpose(),
            secondary_cell_to_mortar: xi_scell,
            mortar_to_secondary_avg: CsrMatrix::from_triplets(lg.num_cells, n, &avg),
        });
    }
    let face = CsrMatrix::from_triplets(nm, nf, &g_face);
    let scell = CsrMatrix::from_triplets(nm, nc, &g_scell);
    Ok(ProjectionSet {
        interfaces: local,
        mortar_to_primary_face: face.transpose(),
        primary_face_to_mortar: face,
        primary_cell_to_mortar: CsrMatrix::from_triplets(nm, nc, &g_pcell),
        mortar_to_secondary_int: scell.transpose(),
        secondary_cell_to_mortar: scell,
        mortar_to_secondary_avg: CsrMatrix::from_triplets(nc, nm, &g_avg),
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::geometry::{build_mdg, FractureSpec, GeometrySpec};

    fn appendix(cells: usize) -> MixedDimensionalGrid {
        build_mdg(&GeometrySpec::unit_box(3, cells).with_fracture(FractureSpec {
            fixed_axis: 0,
            fixed_value_m: 0.5,
            extents_m: vec![[0.25, 0.75], [0.25, 0.75]],
        }))
        .unwrap()
    }

    #[test]
    fn appendix_interface_has_two_sides_of_four() {
        let mdg = appendix(4);
        let proj = build_projections(&mdg).unwrap();
        let p = &proj.interfaces[0];
        assert_eq!(p.primary_face_to_mortar.shape(), (8, mdg.matrix().num_faces));
        assert_eq!(p.mortar_to_secondary_int.shape(), (4, 8));
    }

    #[test]
    fn secondary_partition_of_unity() {
        let mdg = appendix(4);
        let proj = build_projections(&mdg).unwrap();
        let p = &proj.interfaces[0];
        let ones = vec![1.0; 4];
        let back = p.mortar_to_secondary_avg.matvec(&p.secondary_cell_to_mortar.matvec(&ones));
        assert_eq!(back, ones);
    }

    #[test]
    fn single_unit_entry_per_face_row() {
        let mdg = appendix(4);
        let proj = build_projections(&mdg).unwrap();
        let xi = &proj.interfaces[0].primary_face_to_mortar;
        for (k, mc) in mdg.interfaces[0].cells.iter().enumerate() {
            let (cols, vals) = xi.row(k);
            assert_eq!(cols, &[mc.primary_face]);
            assert_eq!(vals, &[1.0]);
        }
    }

    #[test]
    fn face_maps_are_mutually_inverse_on_mortar_fields() {
        let mdg = appendix(8);
        let proj = build_projections(&mdg).unwrap();
        let nm = mdg.num_mortar_cells_total();
        let m: Vec<f64> = (0..nm).map(|k| (k as f64 * 0.37).sin()).collect();
        let round = proj.primary_face_to_mortar.matvec(&proj.mortar_to_primary_face.matvec(&m));
        assert_eq!(round, m);
    }
}
