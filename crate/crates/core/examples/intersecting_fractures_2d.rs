//! Builds a 2D grid with two crossing fractures and prints its subdomains and interfaces.

use fracflow::geometry::{build_mdg, build_projections, FractureSpec, GeometrySpec};

fn main() {
    let spec = GeometrySpec::unit_box(2, 4)
        .with_fracture(FractureSpec { fixed_axis: 0, fixed_value_m: 0.5, extents_m: vec![[0.0, 1.0]] })
        .with_fracture(FractureSpec { fixed_axis: 1, fixed_value_m: 0.5, extents_m: vec![[0.25, 1.0]] });
    let mdg = build_mdg(&spec).unwrap();
    for (i, g) in mdg.subdomains.iter().enumerate() {
        println!("subdomain {i}: dim {}, {} cells, {} faces", g.dim, g.num_cells, g.num_faces);
    }
    for (i, m) in mdg.interfaces.iter().enumerate() {
        println!("interface {i}: {} -> {}, dim {}, {} mortar cells", m.primary, m.secondary, m.dim, m.num_cells());
    }
    let proj = build_projections(&mdg).unwrap();
    let (r, c) = proj.primary_face_to_mortar.shape();
    println!("face-to-mortar map {r} x {c}");
}
