use std::collections::HashMap;

use serde::{Deserialize, Serialize};

use super::grid::{compute_geometry, FaceTag, Grid, IndexBox, Point};
use super::GeometryError;

/// An axis-aligned fracture: a segment in 2D or a rectangle in 3D.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct FractureSpec {
    /// Axis normal to the fracture (0 = x, 1 = y, 2 = z).
    pub fixed_axis: usize,
    pub fixed_value_m: f64,
    /// `[lo, hi]` along each remaining ambient axis, in increasing axis order.
    pub extents_m: Vec<[f64; 2]>,
}

impl FractureSpec {
    /// Fracture spanning the axis-aligned box with corners `lo` and `hi`.
    ///
    /// Exactly one of the first `ambient_dim` axes must be collapsed.
    pub fn from_corners(ambient_dim: usize, lo: Point, hi: Point) -> Result<Self, GeometryError> {
        let collapsed: Vec<usize> = (0..ambient_dim).filter(|&a| lo[a] == hi[a]).collect();
        if collapsed.len() != 1 {
            return Err(GeometryError::UnsupportedGeometry(format!(
                "fracture with corners {lo:?} and {hi:?} is not an axis-aligned codimension-one object"
            )));
        }
        let fixed_axis = collapsed[0];
        let extents_m = (0..ambient_dim)
            .filter(|&a| a != fixed_axis)
            .map(|a| [lo[a].min(hi[a]), lo[a].max(hi[a])])
            .collect();
        Ok(Self { fixed_axis, fixed_value_m: lo[fixed_axis], extents_m })
    }
}

/// Box domain `[0, L_0] x ... x [0, L_{N-1}]`, its Cartesian subdivision and the fracture set.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct GeometrySpec {
    pub ambient_dim: usize,
    pub extent_m: Vec<f64>,
    pub cells: Vec<usize>,
    #[serde(default)]
    pub fractures: Vec<FractureSpec>,
}

impl GeometrySpec {
    pub fn unit_box(ambient_dim: usize, cells_per_axis: usize) -> Self {
        Self {
            ambient_dim,
            extent_m: vec![1.0; ambient_dim],
            cells: vec![cells_per_axis; ambient_dim],
            fractures: Vec::new(),
        }
    }

    pub fn with_fracture(mut self, fracture: FractureSpec) -> Self {
        self.fractures.push(fracture);
        self
    }

    fn diagonal(&self) -> f64 {
        self.extent_m.iter().map(|l| l * l).sum::<f64>().sqrt()
    }
}

/// One matched triple of an interface: mortar cell, higher-dimensional face, lower-dimensional cell.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct MortarCell {
    pub side: usize,
    pub primary_face: usize,
    pub secondary_cell: usize,
}

/// Interface grid between a subdomain pair one dimension apart.
#[derive(Clone, Debug)]
pub struct MortarGrid {
    pub id: usize,
    pub dim: usize,
    /// Higher-dimensional neighbour.
    pub primary: usize,
    /// Lower-dimensional neighbour.
    pub secondary: usize,
    /// Mortar cells ordered by side, then by secondary cell.
    pub cells: Vec<MortarCell>,
    pub num_sides: usize,
    pub cell_volumes: Vec<f64>,
    pub cell_centers: Vec<Point>,
    /// Unit normal pointing from the primary into the secondary subdomain, per mortar cell.
    pub normals: Vec<Point>,
}

impl MortarGrid {
    pub fn num_cells(&self) -> usize {
        self.cells.len()
    }

    pub fn side_cells(&self, side: usize) -> impl Iterator<Item = (usize, &MortarCell)> {
        self.cells.iter().enumerate().filter(move |(_, m)| m.side == side)
    }
}

/// Graph of subdomain grids of decreasing dimension coupled through mortar grids.
#[derive(Clone, Debug)]
pub struct MixedDimensionalGrid {
    pub ambient_dim: usize,
    pub subdomains: Vec<Grid>,
    pub interfaces: Vec<MortarGrid>,
    /// For each subdomain, the interfaces to its higher-dimensional neighbours.
    pub higher_interfaces: Vec<Vec<usize>>,
    /// For each subdomain, the interfaces to its lower-dimensional neighbours.
    pub lower_interfaces: Vec<Vec<usize>>,
    pub extent_m: [f64; 3],
    /// Absolute geometric matching tolerance.
    pub tolerance: f64,
}

impl MixedDimensionalGrid {
    pub fn num_subdomains(&self) -> usize {
        self.subdomains.len()
    }

    pub fn subdomain_dims(&self) -> Vec<usize> {
        self.subdomains.iter().map(|g| g.dim).collect()
    }

    pub fn interface_dims(&self) -> Vec<usize> {
        self.interfaces.iter().map(|m| m.dim).collect()
    }

    pub fn subdomains_of_dim(&self, dim: usize) -> impl Iterator<Item = &Grid> {
        self.subdomains.iter().filter(move |g| g.dim == dim)
    }

    pub fn matrix(&self) -> &Grid {
        &self.subdomains[0]
    }

    /// Offsets of each subdomain block in the global cell ordering (length `n + 1`).
    pub fn cell_offsets(&self) -> Vec<usize> {
        offsets(self.subdomains.iter().map(|g| g.num_cells))
    }

    pub fn face_offsets(&self) -> Vec<usize> {
        offsets(self.subdomains.iter().map(|g| g.num_faces))
    }

    pub fn mortar_offsets(&self) -> Vec<usize> {
        offsets(self.interfaces.iter().map(|m| m.num_cells()))
    }

    pub fn num_cells_total(&self) -> usize {
        self.subdomains.iter().map(|g| g.num_cells).sum()
    }

    pub fn num_faces_total(&self) -> usize {
        self.subdomains.iter().map(|g| g.num_faces).sum()
    }

    pub fn num_mortar_cells_total(&self) -> usize {
        self.interfaces.iter().map(|m| m.num_cells()).sum()
    }
}

pub(crate) fn offsets(sizes: impl Iterator<Item = usize>) -> Vec<usize> {
    let mut out = vec![0];
    for s in sizes {
        out.push(out.last().unwrap() + s);
    }
    out
}

/// Region of a subdomain: per axis a closed node-index interval, collapsed when `lo == hi`.
type Region = IndexBox;

fn region_dim(r: &Region) -> usize {
    (0..3).filter(|&a| r.hi[a] > r.lo[a]).count()
}

/// Builds the conforming mixed-dimensional grid described by `spec`.
pub fn build_mdg(spec: &GeometrySpec) -> Result<MixedDimensionalGrid, GeometryError> {
    let n = spec.ambient_dim;
    if !(n == 2 || n == 3) {
        return Err(GeometryError::UnsupportedGeometry(format!("ambient dimension {n} (expected 2 or 3)")));
    }
    if spec.extent_m.len() != n || spec.cells.len() != n {
        return Err(GeometryError::UnsupportedGeometry(format!(
            "extent and cell counts must have {n} entries"
        )));
    }
    if spec.extent_m.iter().any(|&l| !(l > 0.0)) || spec.cells.iter().any(|&c| c == 0) {
        return Err(GeometryError::UnsupportedGeometry("box extents and cell counts must be positive".into()));
    }
    let tol = 1e-10 * spec.diagonal();

    let mut node_coords: [Vec<f64>; 3] = [vec![0.0], vec![0.0], vec![0.0]];
    let mut counts = [0usize; 3];
    for a in 0..n {
        counts[a] = spec.cells[a];
        node_coords[a] = (0..=spec.cells[a])
            .map(|k| spec.extent_m[a] * k as f64 / spec.cells[a] as f64)
            .collect();
    }
    let snap = |axis: usize, x: f64, what: &str| -> Result<usize, GeometryError> {
        let h = spec.extent_m[axis] / spec.cells[axis] as f64;
        let k = (x / h).round();
        if k < 0.0 || k > spec.cells[axis] as f64 || (k * h - x).abs() > tol {
            return Err(GeometryError::NonConformingGeometry(format!(
                "{what} coordinate {x} on axis {axis} is not a grid line (spacing {h})"
            )));
        }
        Ok(k as usize)
    };

    let mut regions: Vec<Region> = vec![IndexBox { lo: [0; 3], hi: counts }];
    for (i, fr) in spec.fractures.iter().enumerate() {
        if fr.fixed_axis >= n || fr.extents_m.len() != n - 1 {
            return Err(GeometryError::UnsupportedGeometry(format!(
                "fracture {i}: needs a fixed axis below {n} and {} extents",
                n - 1
            )));
        }
        let fixed = snap(fr.fixed_axis, fr.fixed_value_m, &format!("fracture {i} plane"))?;
        if fixed == 0 || fixed == counts[fr.fixed_axis] {
            return Err(GeometryError::UnsupportedGeometry(format!(
                "fracture {i} lies on the domain boundary"
            )));
        }
        let mut r = IndexBox { lo: [0; 3], hi: [0; 3] };
        r.lo[fr.fixed_axis] = fixed;
        r.hi[fr.fixed_axis] = fixed;
        let others = (0..n).filter(|&a| a != fr.fixed_axis);
        for (a, ext) in others.zip(&fr.extents_m) {
            let lo = snap(a, ext[0], &format!("fracture {i} extent"))?;
            let hi = snap(a, ext[1], &format!("fracture {i} extent"))?;
            if hi <= lo {
                return Err(GeometryError::UnsupportedGeometry(format!(
                    "fracture {i} has an empty extent on axis {a}"
                )));
            }
            r.lo[a] = lo;
            r.hi[a] = hi;
        }
        regions.push(r);
    }

    // Intersections of N-1 objects, then (3D) of the resulting lines.
    let mut by_dim: Vec<Region> = regions[1..].to_vec();
    for target in (0..n.saturating_sub(1)).rev() {
        let parents: Vec<Region> = by_dim.iter().copied().filter(|r| region_dim(r) == target + 1).collect();
        let mut found: Vec<Region> = Vec::new();
        for i in 0..parents.len() {
            for j in i + 1..parents.len() {
                if let Some(r) = intersect(&parents[i], &parents[j], target)? {
                    if !found.contains(&r) {
                        found.push(r);
                    }
                }
            }
        }
        for i in 0..found.len() {
            for j in i + 1..found.len() {
                if overlapping_distinct(&found[i], &found[j]) {
                    return Err(GeometryError::UnsupportedGeometry(
                        "partially overlapping fracture intersections".into(),
                    ));
                }
            }
        }
        by_dim.extend(found);
    }
    regions.truncate(1);
    regions.extend(by_dim);

    let mut subdomains: Vec<Grid> = regions
        .iter()
        .enumerate()
        .map(|(id, r)| Grid::tensor(id, n, *r, node_coords.clone()))
        .collect();

    // Couplings: every (higher, lower) pair one dimension apart with the lower region inside the higher.
    let mut interfaces = Vec::new();
    let mut higher_interfaces = vec![Vec::new(); regions.len()];
    let mut lower_interfaces = vec![Vec::new(); regions.len()];
    for h in 0..regions.len() {
        for l in 0..regions.len() {
            if region_dim(&regions[h]) != region_dim(&regions[l]) + 1 || !contains(&regions[h], &regions[l]) {
                continue;
            }
            let id = interfaces.len();
            let mortar = couple(&mut subdomains, h, l, id)?;
            interfaces.push(mortar);
            higher_interfaces[l].push(id);
            lower_interfaces[h].push(id);
        }
    }

    for g in subdomains.iter_mut() {
        g.rebuild_incidence();
        for f in 0..g.num_faces {
            if matches!(g.boundary_tags[f], FaceTag::FractureTrace { .. }) {
                continue;
            }
            g.boundary_tags[f] = if g.face_cells[f].len() == 2 {
                FaceTag::Interior
            } else {
                let a = g.face_axis[f];
                let k = g.face_boxes[f].lo[a];
                if k == 0 || k == counts[a] {
                    FaceTag::External { axis: a, upper: k != 0 }
                } else {
                    FaceTag::Tip
                }
            };
        }
    }
    let subdomains = subdomains.into_iter().map(compute_geometry).collect::<Result<Vec<_>, _>>()?;

    let mut mdg = MixedDimensionalGrid {
        ambient_dim: n,
        subdomains,
        interfaces,
        higher_interfaces,
        lower_interfaces,
        extent_m: [
            spec.extent_m[0],
            spec.extent_m[1],
            if n == 3 { spec.extent_m[2] } else { 0.0 },
        ],
        tolerance: tol,
    };
    finish_mortar_geometry(&mut mdg)?;
    Ok(mdg)
}

fn contains(outer: &Region, inner: &Region) -> bool {
    (0..3).all(|a| {
        if outer.hi[a] == outer.lo[a] {
            inner.lo[a] == outer.lo[a] && inner.hi[a] == outer.lo[a]
        } else {
            outer.lo[a] <= inner.lo[a] && inner.hi[a] <= outer.hi[a]
        }
    })
}

fn overlapping_distinct(a: &Region, b: &Region) -> bool {
    if a == b {
        return false;
    }
    let mut shared_extent = false;
    for k in 0..3 {
        let lo = a.lo[k].max(b.lo[k]);
        let hi = a.hi[k].min(b.hi[k]);
        if lo > hi {
            return false;
        }
        let a_coll = a.lo[k] == a.hi[k];
        let b_coll = b.lo[k] == b.hi[k];
        if a_coll != b_coll {
            return false;
        }
        if hi > lo {
            shared_extent = true;
        }
    }
    shared_extent
}

/// Intersection of two regions, required to have dimension `target` when nonempty.
fn intersect(a: &Region, b: &Region, target: usize) -> Result<Option<Region>, GeometryError> {
    let mut r = IndexBox { lo: [0; 3], hi: [0; 3] };
    for k in 0..3 {
        let lo = a.lo[k].max(b.lo[k]);
        let hi = a.hi[k].min(b.hi[k]);
        if lo > hi {
            return Ok(None);
        }
        r.lo[k] = lo;
        r.hi[k] = hi;
    }
    let d = region_dim(&r);
    if d == target {
        Ok(Some(r))
    } else if d > target {
        Err(GeometryError::UnsupportedGeometry("coplanar overlapping fractures".into()))
    } else {
        // Objects touching in a set of lower dimension than expected.
        let touching_corner = (0..3).any(|k| {
            let a_coll = a.lo[k] == a.hi[k];
            let b_coll = b.lo[k] == b.hi[k];
            !a_coll && !b_coll && r.lo[k] == r.hi[k]
        });
        if touching_corner {
            Err(GeometryError::UnsupportedGeometry(
                "fractures touching along a lower-dimensional set".into(),
            ))
        } else {
            Ok(None)
        }
    }
}

/// Splits the faces of `h` coinciding with cells of `l` and returns the mortar grid.
fn couple(subdomains: &mut [Grid], h: usize, l: usize, id: usize) -> Result<MortarGrid, GeometryError> {
    let lower_cells = subdomains[l].cell_boxes.clone();
    let lower_dim = subdomains[l].dim;
    let hg = &mut subdomains[h];
    let mut face_lookup: HashMap<(usize, IndexBox), usize> = HashMap::new();
    for f in 0..hg.face_boxes.len() {
        face_lookup.entry((hg.face_axis[f], hg.face_boxes[f])).or_insert(f);
    }
    let mut per_side: [Vec<MortarCell>; 2] = [Vec::new(), Vec::new()];
    for (lc, cb) in lower_cells.iter().enumerate() {
        let axis = (0..3)
            .find(|&a| cb.lo[a] == cb.hi[a] && is_active(hg, a))
            .ok_or_else(|| GeometryError::MatchingFailure(format!("no normal axis for cell {lc} of grid {l}")))?;
        let f = *face_lookup.get(&(axis, *cb)).ok_or_else(|| {
            GeometryError::MatchingFailure(format!("cell {lc} of grid {l} matches no face of grid {h}"))
        })?;
        if matches!(hg.boundary_tags[f], FaceTag::FractureTrace { .. }) {
            return Err(GeometryError::MatchingFailure(format!(
                "face {f} of grid {h} is matched by two lower-dimensional cells"
            )));
        }
        let inc = hg.face_cells[f].clone();
        if inc.len() == 2 {
            let nf = hg.split_face(f);
            hg.boundary_tags[f] = FaceTag::FractureTrace { interface: id, side: 0 };
            hg.boundary_tags[nf] = FaceTag::FractureTrace { interface: id, side: 1 };
            per_side[0].push(MortarCell { side: 0, primary_face: f, secondary_cell: lc });
            per_side[1].push(MortarCell { side: 1, primary_face: nf, secondary_cell: lc });
        } else {
            let side = if inc[0].1 > 0.0 { 0 } else { 1 };
            hg.boundary_tags[f] = FaceTag::FractureTrace { interface: id, side };
            per_side[side].push(MortarCell { side, primary_face: f, secondary_cell: lc });
        }
    }
    let num_sides = per_side.iter().filter(|s| !s.is_empty()).count();
    let cells: Vec<MortarCell> = per_side.into_iter().flatten().collect();
    Ok(MortarGrid {
        id,
        dim: lower_dim,
        primary: h,
        secondary: l,
        cells,
        num_sides,
        cell_volumes: Vec::new(),
        cell_centers: Vec::new(),
        normals: Vec::new(),
    })
}

fn is_active(g: &Grid, axis: usize) -> bool {
    g.cell_boxes.first().is_some_and(|b| b.hi[axis] > b.lo[axis])
}

fn finish_mortar_geometry(mdg: &mut MixedDimensionalGrid) -> Result<(), GeometryError> {
    let tol = mdg.tolerance;
    for m in mdg.interfaces.iter_mut() {
        let hg = &mdg.subdomains[m.primary];
        let lg = &mdg.subdomains[m.secondary];
        let mut vols = Vec::with_capacity(m.cells.len());
        let mut centers = Vec::with_capacity(m.cells.len());
        let mut normals = Vec::with_capacity(m.cells.len());
        for mc in &m.cells {
            let fc = hg.face_centers[mc.primary_face];
            let lc = lg.cell_centers[mc.secondary_cell];
            let dist = super::grid::distance(&fc, &lc);
            let area = hg.face_areas[mc.primary_face];
            if dist > tol || (area - lg.cell_volumes[mc.secondary_cell]).abs() > tol * area.max(1.0) {
                return Err(GeometryError::MatchingFailure(format!(
                    "mortar cell of interface {} mismatches face {} / cell {}",
                    m.id, mc.primary_face, mc.secondary_cell
                )));
            }
            let (_, sign) = hg.face_cells[mc.primary_face][0];
            let axis = hg.face_axis[mc.primary_face];
            let mut n = [0.0; 3];
            n[axis] = sign;
            vols.push(area);
            centers.push(lc);
            normals.push(n);
        }
        m.cell_volumes = vols;
        m.cell_centers = centers;
        m.normals = normals;
    }
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;

    fn appendix_geometry(cells: usize) -> GeometrySpec {
        GeometrySpec::unit_box(3, cells).with_fracture(FractureSpec {
            fixed_axis: 0,
            fixed_value_m: 0.5,
            extents_m: vec![[0.25, 0.75], [0.25, 0.75]],
        })
    }

    pub(crate) fn crossing_2d() -> GeometrySpec {
        GeometrySpec::unit_box(2, 2)
            .with_fracture(FractureSpec { fixed_axis: 0, fixed_value_m: 0.5, extents_m: vec![[0.0, 1.0]] })
            .with_fracture(FractureSpec { fixed_axis: 1, fixed_value_m: 0.5, extents_m: vec![[0.0, 1.0]] })
    }

    #[test]
    fn no_fractures_gives_single_subdomain() {
        let mdg = build_mdg(&GeometrySpec::unit_box(3, 2)).unwrap();
        assert_eq!(mdg.subdomain_dims(), vec![3]);
        assert!(mdg.interfaces.is_empty());
        assert_eq!(mdg.matrix().num_cells, 8);
    }

    #[test]
    fn single_vertical_fracture() {
        let mdg = build_mdg(&appendix_geometry(4)).unwrap();
        assert_eq!(mdg.subdomain_dims(), vec![3, 2]);
        assert_eq!(mdg.interface_dims(), vec![2]);
        let m = &mdg.interfaces[0];
        assert_eq!(m.num_sides, 2);
        assert_eq!(m.num_cells(), 8);
        assert_eq!(m.side_cells(0).count(), 4);
        let frac = &mdg.subdomains[1];
        assert!((frac.total_volume() - 0.25).abs() < 1e-14);
        // 4x4x4 grid has 3*4*4*5 = 240 faces before splitting.
        assert_eq!(mdg.matrix().num_faces, 240 + 4);
        // All fracture faces on its boundary are immersed tips.
        let tips = frac.boundary_tags.iter().filter(|t| **t == FaceTag::Tip).count();
        assert_eq!(tips, 8);
    }

    #[test]
    fn crossing_fractures_in_2d() {
        let mdg = build_mdg(&crossing_2d()).unwrap();
        assert_eq!(mdg.subdomain_dims(), vec![2, 1, 1, 0]);
        assert_eq!(mdg.interface_dims(), vec![1, 1, 0, 0]);
        for m in &mdg.interfaces {
            assert_eq!(m.num_sides, 2);
        }
        // Each fracture has two cells and one split face at the crossing.
        for g in &mdg.subdomains[1..3] {
            assert_eq!(g.num_cells, 2);
            assert_eq!(g.num_faces, 4);
            let ext = g.boundary_tags.iter().filter(|t| matches!(t, FaceTag::External { .. })).count();
            assert_eq!(ext, 2);
        }
        assert_eq!(mdg.higher_interfaces[3].len(), 2);
    }

    #[test]
    fn non_conforming_fracture_rejected() {
        let spec = GeometrySpec::unit_box(2, 4).with_fracture(FractureSpec {
            fixed_axis: 0,
            fixed_value_m: 0.3,
            extents_m: vec![[0.25, 0.75]],
        });
        assert!(matches!(build_mdg(&spec), Err(GeometryError::NonConformingGeometry(_))));
    }

    #[test]
    fn diagonal_fracture_rejected() {
        let err = FractureSpec::from_corners(2, [0.0, 0.0, 0.0], [1.0, 1.0, 0.0]).unwrap_err();
        assert!(matches!(err, GeometryError::UnsupportedGeometry(_)));
        let ok = FractureSpec::from_corners(2, [0.5, 0.25, 0.0], [0.5, 0.75, 0.0]).unwrap();
        assert_eq!(ok.fixed_axis, 0);
    }

    #[test]
    fn three_fractures_in_3d_meet_in_lines_and_a_point() {
        let mut spec = GeometrySpec::unit_box(3, 2);
        for axis in 0..3 {
            spec.fractures.push(FractureSpec {
                fixed_axis: axis,
                fixed_value_m: 0.5,
                extents_m: vec![[0.0, 1.0], [0.0, 1.0]],
            });
        }
        let mdg = build_mdg(&spec).unwrap();
        assert_eq!(mdg.subdomain_dims(), vec![3, 2, 2, 2, 1, 1, 1, 0]);
        let count = |d: usize| mdg.interface_dims().iter().filter(|&&x| x == d).count();
        assert_eq!(count(2), 3);
        assert_eq!(count(1), 6);
        assert_eq!(count(0), 3);
    }

    #[test]
    fn refinement_scales_cells_and_preserves_volume() {
        for n in [2usize, 3] {
            let coarse = build_mdg(&GeometrySpec::unit_box(n, 2)).unwrap();
            let fine = build_mdg(&GeometrySpec::unit_box(n, 4)).unwrap();
            assert_eq!(fine.matrix().num_cells, coarse.matrix().num_cells * (1 << n));
            assert!((fine.matrix().total_volume() - coarse.matrix().total_volume()).abs() < 1e-14);
        }
    }
}
