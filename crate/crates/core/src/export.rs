//! Field output: columnar text tables and legacy ASCII unstructured-grid files.
//!
//! All writers iterate subdomains, cells and mortar cells in index order, so a given
//! state always produces identical bytes.

use std::fmt::Write as _;
use std::io;
use std::path::{Path, PathBuf};

use crate::config::OutputFormat;
use crate::geometry::{MixedDimensionalGrid, Point};
use crate::physics::FlowModel;

/// Cell and mortar fields of one state, in global ordering.
#[derive(Clone, Debug, PartialEq)]
pub struct FieldSnapshot {
    pub time_s: f64,
    pub pressure: Vec<f64>,
    pub temperature: Vec<f64>,
    pub aperture: Vec<f64>,
    pub specific_volume: Vec<f64>,
    pub interface_darcy_flux: Vec<f64>,
    /// Empty when the energy balance is inactive.
    pub interface_enthalpy_flux: Vec<f64>,
    pub interface_heat_flux: Vec<f64>,
}

impl FieldSnapshot {
    pub fn from_model(model: &FlowModel) -> Self {
        let (pressure, temperature) = model.cell_fields();
        let sys = model.system();
        let get = |v: Option<crate::ad::VariableId>| v.map(|v| sys.values_of(v).to_vec()).unwrap_or_default();
        let nm = model.mdg.num_mortar_cells_total();
        let mut darcy = get(model.vars.interface_darcy_flux);
        darcy.resize(nm, 0.0);
        Self {
            time_s: model.time(),
            pressure,
            temperature,
            aperture: model.properties.aperture.clone(),
            specific_volume: model.properties.specific_volume.clone(),
            interface_darcy_flux: darcy,
            interface_enthalpy_flux: get(model.vars.interface_enthalpy_flux),
            interface_heat_flux: get(model.vars.interface_heat_flux),
        }
    }
}

fn num(v: f64) -> String {
    format!("{v:.10e}")
}

/// One row per cell: coordinates, dimension, subdomain, cell index and fields.
pub fn columns_text(mdg: &MixedDimensionalGrid, s: &FieldSnapshot) -> String {
    let mut out = String::new();
    writeln!(out, "# time_s {}", num(s.time_s)).unwrap();
    writeln!(out, "x_m y_m z_m dim subdomain cell pressure_pa temperature_k aperture_m specific_volume").unwrap();
    let off = mdg.cell_offsets();
    for (sd, g) in mdg.subdomains.iter().enumerate() {
        for c in 0..g.num_cells {
            let i = off[sd] + c;
            let x = g.cell_centers[c];
            writeln!(
                out,
                "{} {} {} {} {sd} {c} {} {} {} {}",
                num(x[0]),
                num(x[1]),
                num(x[2]),
                g.dim,
                num(s.pressure[i]),
                num(s.temperature[i]),
                num(s.aperture[i]),
                num(s.specific_volume[i])
            )
            .unwrap();
        }
    }
    out
}

/// Side of the higher-dimensional neighbour relative to the lower subdomain, along the
/// interface normal axis: `negative` or `positive`.
fn side_label(mdg: &MixedDimensionalGrid, interface: usize, k: usize) -> &'static str {
    let m = &mdg.interfaces[interface];
    let cell = m.cells[k];
    let hg = &mdg.subdomains[m.primary];
    let lg = &mdg.subdomains[m.secondary];
    let axis = hg.face_axis[cell.primary_face];
    let hc = hg.cells_of_face(cell.primary_face)[0].0;
    if hg.cell_centers[hc][axis] < lg.cell_centers[cell.secondary_cell][axis] {
        "negative"
    } else {
        "positive"
    }
}

/// One row per mortar cell with its side label and interface fluxes.
pub fn interfaces_text(mdg: &MixedDimensionalGrid, s: &FieldSnapshot) -> String {
    let mut out = String::new();
    writeln!(out, "# time_s {}", num(s.time_s)).unwrap();
    writeln!(
        out,
        "x_m y_m z_m dim interface mortar_cell side primary secondary darcy_flux_m3_s enthalpy_flux_w heat_flux_w"
    )
    .unwrap();
    let off = mdg.mortar_offsets();
    let at = |v: &[f64], i: usize| v.get(i).copied().unwrap_or(0.0);
    for (id, m) in mdg.interfaces.iter().enumerate() {
        for k in 0..m.num_cells() {
            let i = off[id] + k;
            let x = m.cell_centers[k];
            writeln!(
                out,
                "{} {} {} {} {id} {k} {} {} {} {} {} {}",
                num(x[0]),
                num(x[1]),
                num(x[2]),
                m.dim,
                side_label(mdg, id, k),
                m.primary,
                m.secondary,
                num(at(&s.interface_darcy_flux, i)),
                num(at(&s.interface_enthalpy_flux, i)),
                num(at(&s.interface_heat_flux, i))
            )
            .unwrap();
        }
    }
    out
}

/// Corner points of an axis-aligned box, first free axis fastest.
fn corners(lo: &Point, hi: &Point) -> Vec<Point> {
    let free: Vec<usize> = (0..3).filter(|&a| hi[a] > lo[a]).collect();
    (0..1usize << free.len())
        .map(|bits| {
            let mut p = *lo;
            for (j, &a) in free.iter().enumerate() {
                if bits >> j & 1 == 1 {
                    p[a] = hi[a];
                }
            }
            p
        })
        .collect()
}

/// Legacy ASCII unstructured grid holding every subdomain: voxels, pixels, lines or
/// vertices by cell dimension, with cell-data scalars.
pub fn vtk_text(mdg: &MixedDimensionalGrid, s: &FieldSnapshot) -> String {
    let mut cells: Vec<(usize, usize, Vec<Point>)> = Vec::new();
    for (sd, g) in mdg.subdomains.iter().enumerate() {
        for c in 0..g.num_cells {
            let (lo, hi) = g.cell_bounds(c);
            cells.push((sd, g.dim, corners(&lo, &hi)));
        }
    }
    let npts: usize = cells.iter().map(|c| c.2.len()).sum();
    let mut out = String::new();
    writeln!(out, "# vtk DataFile Version 3.0").unwrap();
    writeln!(out, "fracflow fields t = {}", num(s.time_s)).unwrap();
    writeln!(out, "ASCII").unwrap();
    writeln!(out, "DATASET UNSTRUCTURED_GRID").unwrap();
    writeln!(out, "POINTS {npts} double").unwrap();
    for (_, _, pts) in &cells {
        for p in pts {
            writeln!(out, "{} {} {}", num(p[0]), num(p[1]), num(p[2])).unwrap();
        }
    }
    writeln!(out, "CELLS {} {}", cells.len(), cells.len() + npts).unwrap();
    let mut next = 0;
    for (_, _, pts) in &cells {
        let ids: Vec<String> = (next..next + pts.len()).map(|i| i.to_string()).collect();
        writeln!(out, "{} {}", pts.len(), ids.join(" ")).unwrap();
        next += pts.len();
    }
    writeln!(out, "CELL_TYPES {}", cells.len()).unwrap();
    for (_, dim, _) in &cells {
        let t = match dim {
            3 => 11,
            2 => 8,
            1 => 3,
            _ => 1,
        };
        writeln!(out, "{t}").unwrap();
    }
    writeln!(out, "CELL_DATA {}", cells.len()).unwrap();
    let scalar = |out: &mut String, name: &str, ty: &str, vals: &mut dyn Iterator<Item = String>| {
        writeln!(out, "SCALARS {name} {ty} 1").unwrap();
        writeln!(out, "LOOKUP_TABLE default").unwrap();
        for v in vals {
            writeln!(out, "{v}").unwrap();
        }
    };
    scalar(&mut out, "subdomain", "int", &mut cells.iter().map(|c| c.0.to_string()));
    scalar(&mut out, "dim", "int", &mut cells.iter().map(|c| c.1.to_string()));
    for (name, field) in [
        ("pressure_pa", &s.pressure),
        ("temperature_k", &s.temperature),
        ("aperture_m", &s.aperture),
        ("specific_volume", &s.specific_volume),
    ] {
        scalar(&mut out, name, "double", &mut field.iter().map(|v| num(*v)));
    }
    out
}

/// Writes the requested formats as `<stem>.<ext>` files in `dir`, creating it if needed.
pub fn write_snapshot(
    dir: &Path,
    stem: &str,
    mdg: &MixedDimensionalGrid,
    snapshot: &FieldSnapshot,
    formats: &[OutputFormat],
) -> io::Result<Vec<PathBuf>> {
    std::fs::create_dir_all(dir)?;
    let mut formats = formats.to_vec();
    formats.sort();
    formats.dedup();
    let mut written = Vec::new();
    for f in formats {
        let (name, text) = match f {
            OutputFormat::Columns => (format!("{stem}.cells.txt"), columns_text(mdg, snapshot)),
            OutputFormat::Interfaces => (format!("{stem}.interfaces.txt"), interfaces_text(mdg, snapshot)),
            OutputFormat::Vtk => (format!("{stem}.vtk"), vtk_text(mdg, snapshot)),
        };
        let path = dir.join(name);
        std::fs::write(&path, text)?;
        written.push(path);
    }
    Ok(written)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::geometry::{build_mdg, GeometrySpec};

    fn uniform_snapshot(mdg: &MixedDimensionalGrid) -> FieldSnapshot {
        let n = mdg.num_cells_total();
        FieldSnapshot {
            time_s: 0.0,
            pressure: vec![1.0; n],
            temperature: vec![2.0; n],
            aperture: vec![1.0; n],
            specific_volume: vec![1.0; n],
            interface_darcy_flux: vec![0.0; mdg.num_mortar_cells_total()],
            interface_enthalpy_flux: Vec::new(),
            interface_heat_flux: Vec::new(),
        }
    }

    #[test]
    fn single_cell_has_one_row_at_its_center() {
        let mut spec = GeometrySpec::unit_box(3, 1);
        spec.extent_m = vec![2.0, 4.0, 6.0];
        let mdg = build_mdg(&spec).unwrap();
        let text = columns_text(&mdg, &uniform_snapshot(&mdg));
        let rows: Vec<&str> = text.lines().skip(2).collect();
        assert_eq!(rows.len(), 1);
        let cols: Vec<f64> = rows[0].split_whitespace().take(3).map(|v| v.parse().unwrap()).collect();
        assert_eq!(cols, vec![1.0, 2.0, 3.0]);
    }

    #[test]
    fn pixel_corners_vary_first_free_axis_fastest() {
        let c = corners(&[0.0, 1.0, 0.0], &[1.0, 1.0, 2.0]);
        assert_eq!(c, vec![[0.0, 1.0, 0.0], [1.0, 1.0, 0.0], [0.0, 1.0, 2.0], [1.0, 1.0, 2.0]]);
        assert_eq!(corners(&[0.5, 0.5, 0.5], &[0.5, 0.5, 0.5]).len(), 1);
    }

    #[test]
    fn vtk_counts_are_consistent() {
        let mdg = build_mdg(&GeometrySpec::unit_box(2, 2)).unwrap();
        let text = vtk_text(&mdg, &uniform_snapshot(&mdg));
        assert!(text.starts_with("# vtk DataFile Version 3.0\n"));
        assert!(text.contains("POINTS 16 double"));
        assert!(text.contains("CELLS 4 20"));
        assert_eq!(text.matches("SCALARS").count(), 6);
    }
}
