use crate::sparse::CsrMatrix;

use super::GeometryError;

pub type Point = [f64; 3];

/// Classification of a grid face.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum FaceTag {
    Interior,
    /// On the boundary of the simulation box; `axis` and `upper` name the box side.
    External { axis: usize, upper: bool },
    /// Internal boundary matched by a mortar cell of `interface` on `side`.
    FractureTrace { interface: usize, side: usize },
    /// Immersed end of a lower-dimensional object.
    Tip,
}

impl FaceTag {
    pub fn is_boundary(&self) -> bool {
        !matches!(self, FaceTag::Interior)
    }
}

/// Axis-aligned extent of a cell or face, in global node indices.
///
/// `lo[a] == hi[a]` marks a collapsed axis.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub struct IndexBox {
    pub lo: [usize; 3],
    pub hi: [usize; 3],
}

/// A cell-centred grid of dimension `dim` embedded in the ambient space.
///
/// All grids in this crate are tensor-product Cartesian boxes, possibly with
/// faces duplicated along lower-dimensional objects. Face-cell incidence is
/// signed: `+1` when the face normal points out of the cell.
#[derive(Clone, Debug)]
pub struct Grid {
    pub id: usize,
    pub dim: usize,
    pub ambient_dim: usize,
    pub num_cells: usize,
    pub num_faces: usize,
    pub num_nodes: usize,
    /// Signed incidence, `num_faces x num_cells`.
    pub cell_faces: CsrMatrix,
    /// Per face: incident `(cell, sign)` pairs.
    pub face_cells: Vec<Vec<(usize, f64)>>,
    pub face_axis: Vec<usize>,
    pub cell_boxes: Vec<IndexBox>,
    pub face_boxes: Vec<IndexBox>,
    pub boundary_tags: Vec<FaceTag>,
    pub face_areas: Vec<f64>,
    pub cell_volumes: Vec<f64>,
    pub cell_centers: Vec<Point>,
    pub face_centers: Vec<Point>,
    pub face_normals: Vec<Point>,
    /// Global node coordinates per axis shared by every grid of a mixed-dimensional grid.
    pub(crate) node_coords: [Vec<f64>; 3],
}

impl Grid {
    /// Tensor-product grid over `region`, whose non-collapsed axes are subdivided at
    /// every global node line.
    pub(crate) fn tensor(id: usize, ambient_dim: usize, region: IndexBox, node_coords: [Vec<f64>; 3]) -> Self {
        let active: Vec<usize> = (0..3).filter(|&a| region.hi[a] > region.lo[a]).collect();
        let dim = active.len();
        let counts: Vec<usize> = active.iter().map(|&a| region.hi[a] - region.lo[a]).collect();

        let num_cells: usize = counts.iter().product();
        let mut cell_boxes = Vec::with_capacity(num_cells);
        let mut cell_index = std::collections::HashMap::new();
        for_each_multi_index(&counts, |idx| {
            let mut b = region;
            for (k, &a) in active.iter().enumerate() {
                b.lo[a] = region.lo[a] + idx[k];
                b.hi[a] = b.lo[a] + 1;
            }
            cell_index.insert(b.lo, cell_boxes.len());
            cell_boxes.push(b);
        });

        let mut face_boxes = Vec::new();
        let mut face_axis = Vec::new();
        let mut face_cells = Vec::new();
        for (k, &a) in active.iter().enumerate() {
            let mut fc = counts.clone();
            fc[k] += 1;
            for_each_multi_index(&fc, |idx| {
                let mut b = region;
                for (m, &ax) in active.iter().enumerate() {
                    b.lo[ax] = region.lo[ax] + idx[m];
                    b.hi[ax] = if ax == a { b.lo[ax] } else { b.lo[ax] + 1 };
                }
                let mut inc = Vec::with_capacity(2);
                if b.lo[a] > region.lo[a] {
                    let mut lower = b.lo;
                    lower[a] -= 1;
                    inc.push((cell_index[&lower], 1.0));
                }
                if b.lo[a] < region.hi[a] {
                    inc.push((cell_index[&b.lo], -1.0));
                }
                face_boxes.push(b);
                face_axis.push(a);
                face_cells.push(inc);
            });
        }
        let num_nodes = counts.iter().map(|c| c + 1).product();
        let num_faces = face_boxes.len();
        let mut grid = Grid {
            id,
            dim,
            ambient_dim,
            num_cells,
            num_faces,
            num_nodes,
            cell_faces: CsrMatrix::zeros(num_faces, num_cells),
            face_cells,
            face_axis,
            cell_boxes,
            face_boxes,
            boundary_tags: vec![FaceTag::Interior; num_faces],
            face_areas: Vec::new(),
            cell_volumes: Vec::new(),
            cell_centers: Vec::new(),
            face_centers: Vec::new(),
            face_normals: Vec::new(),
            node_coords,
        };
        grid.rebuild_incidence();
        grid
    }

    pub(crate) fn rebuild_incidence(&mut self) {
        self.num_faces = self.face_boxes.len();
        let trip: Vec<_> = self
            .face_cells
            .iter()
            .enumerate()
            .flat_map(|(f, inc)| inc.iter().map(move |&(c, s)| (f, c, s)))
            .collect();
        self.cell_faces = CsrMatrix::from_triplets(self.num_faces, self.num_cells, &trip);
    }

    /// Duplicates interior face `f` so that the `-1` cell moves to a new face.
    /// Returns the index of the new face.
    pub(crate) fn split_face(&mut self, f: usize) -> usize {
        let inc = self.face_cells[f].clone();
        debug_assert_eq!(inc.len(), 2);
        let upper = *inc.iter().find(|(_, s)| *s < 0.0).expect("interior face has a -1 cell");
        self.face_cells[f].retain(|(_, s)| *s > 0.0);
        self.face_cells.push(vec![upper]);
        self.face_boxes.push(self.face_boxes[f]);
        self.face_axis.push(self.face_axis[f]);
        self.boundary_tags.push(FaceTag::Interior);
        self.face_boxes.len() - 1
    }

    /// Signed incidence `(cell, sign)` pairs of face `f`.
    pub fn cells_of_face(&self, f: usize) -> &[(usize, f64)] {
        &self.face_cells[f]
    }

    pub fn is_boundary_face(&self, f: usize) -> bool {
        self.face_cells[f].len() == 1
    }

    pub fn total_volume(&self) -> f64 {
        self.cell_volumes.iter().sum()
    }

    /// Cell corners (lower, upper) in ambient coordinates.
    pub fn cell_bounds(&self, c: usize) -> (Point, Point) {
        self.box_bounds(&self.cell_boxes[c])
    }

    pub fn face_bounds(&self, f: usize) -> (Point, Point) {
        self.box_bounds(&self.face_boxes[f])
    }

    fn box_bounds(&self, b: &IndexBox) -> (Point, Point) {
        let mut lo = [0.0; 3];
        let mut hi = [0.0; 3];
        for a in 0..3 {
            lo[a] = self.node_coords[a][b.lo[a]];
            hi[a] = self.node_coords[a][b.hi[a]];
        }
        (lo, hi)
    }

    /// Distance from the center of cell `c` to the center of face `f`.
    pub fn cell_face_distance(&self, c: usize, f: usize) -> f64 {
        distance(&self.cell_centers[c], &self.face_centers[f])
    }
}

/// Fills measures, centers and normals of a grid whose topology is populated.
pub fn compute_geometry(mut g: Grid) -> Result<Grid, GeometryError> {
    let measure = |b: &IndexBox, lo: &Point, hi: &Point, skip: Option<usize>| -> f64 {
        (0..3)
            .filter(|&a| Some(a) != skip && b.hi[a] > b.lo[a])
            .map(|a| hi[a] - lo[a])
            .product::<f64>()
    };
    let mut vols = Vec::with_capacity(g.num_cells);
    let mut centers = Vec::with_capacity(g.num_cells);
    for c in 0..g.num_cells {
        let b = g.cell_boxes[c];
        let (lo, hi) = g.cell_bounds(c);
        let v = measure(&b, &lo, &hi, None);
        let collapsed_ok = (0..3).filter(|&a| b.hi[a] > b.lo[a]).count() == g.dim;
        if !(v > 0.0) || !collapsed_ok {
            return Err(GeometryError::DegenerateCell { grid: g.id, cell: c, volume: v });
        }
        vols.push(v);
        centers.push(midpoint(&lo, &hi));
    }
    let mut areas = Vec::with_capacity(g.num_faces);
    let mut fcenters = Vec::with_capacity(g.num_faces);
    let mut normals = Vec::with_capacity(g.num_faces);
    for f in 0..g.num_faces {
        let (lo, hi) = g.face_bounds(f);
        let area = measure(&g.face_boxes[f], &lo, &hi, Some(g.face_axis[f]));
        let mut n = [0.0; 3];
        n[g.face_axis[f]] = area;
        areas.push(area);
        fcenters.push(midpoint(&lo, &hi));
        normals.push(n);
    }
    g.cell_volumes = vols;
    g.cell_centers = centers;
    g.face_areas = areas;
    g.face_centers = fcenters;
    g.face_normals = normals;
    Ok(g)
}

pub(crate) fn midpoint(a: &Point, b: &Point) -> Point {
    [0.5 * (a[0] + b[0]), 0.5 * (a[1] + b[1]), 0.5 * (a[2] + b[2])]
}

pub fn distance(a: &Point, b: &Point) -> f64 {
    ((a[0] - b[0]).powi(2) + (a[1] - b[1]).powi(2) + (a[2] - b[2]).powi(2)).sqrt()
}

/// Calls `f` for every multi-index below `counts`, first index fastest.
fn for_each_multi_index(counts: &[usize], mut f: impl FnMut(&[usize])) {
    if counts.iter().any(|&c| c == 0) {
        return;
    }
    let mut idx = vec![0usize; counts.len()];
    loop {
        f(&idx);
        let mut k = 0;
        loop {
            if k == counts.len() {
                return;
            }
            idx[k] += 1;
            if idx[k] < counts[k] {
                break;
            }
            idx[k] = 0;
            k += 1;
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn uniform_nodes(n: [usize; 3], len: [f64; 3]) -> [Vec<f64>; 3] {
        let axis = |a: usize| (0..=n[a]).map(|k| len[a] * k as f64 / n[a].max(1) as f64).collect();
        [axis(0), axis(1), axis(2)]
    }

    #[test]
    fn unit_cube_single_cell() {
        let region = IndexBox { lo: [0; 3], hi: [1; 3] };
        let g = compute_geometry(Grid::tensor(0, 3, region, uniform_nodes([1; 3], [1.0; 3]))).unwrap();
        assert_eq!(g.num_cells, 1);
        assert_eq!(g.num_faces, 6);
        assert_eq!(g.cell_volumes, vec![1.0]);
        assert!(g.face_areas.iter().all(|&a| a == 1.0));
    }

    #[test]
    fn two_by_one_square() {
        let region = IndexBox { lo: [0; 3], hi: [2, 1, 0] };
        let g = compute_geometry(Grid::tensor(0, 2, region, uniform_nodes([2, 1, 1], [2.0, 1.0, 0.0]))).unwrap();
        assert_eq!(g.dim, 2);
        let interior: Vec<usize> = (0..g.num_faces).filter(|&f| g.face_cells[f].len() == 2).collect();
        assert_eq!(interior.len(), 1);
        let f = interior[0];
        assert_eq!(g.face_areas[f], 1.0);
        assert_eq!(g.face_normals[f], [1.0, 0.0, 0.0]);
        // Normal points out of the +1 cell, which lies at lower x.
        let (c_plus, _) = g.face_cells[f].iter().copied().find(|(_, s)| *s > 0.0).unwrap();
        assert!(g.cell_centers[c_plus][0] < g.face_centers[f][0]);
    }

    #[test]
    fn point_grid_has_unit_volume_and_no_faces() {
        let region = IndexBox { lo: [1, 1, 0], hi: [1, 1, 0] };
        let g = compute_geometry(Grid::tensor(3, 2, region, uniform_nodes([2, 2, 1], [1.0, 1.0, 0.0]))).unwrap();
        assert_eq!(g.dim, 0);
        assert_eq!(g.num_cells, 1);
        assert_eq!(g.num_faces, 0);
        assert_eq!(g.cell_volumes, vec![1.0]);
        assert_eq!(g.cell_centers[0], [0.5, 0.5, 0.0]);
    }

    #[test]
    fn degenerate_cell_detected() {
        let region = IndexBox { lo: [0; 3], hi: [1, 1, 0] };
        let mut nodes = uniform_nodes([1, 1, 1], [1.0, 1.0, 0.0]);
        nodes[0][1] = 0.0;
        let err = compute_geometry(Grid::tensor(0, 2, region, nodes)).unwrap_err();
        assert!(matches!(err, GeometryError::DegenerateCell { .. }));
    }
}
