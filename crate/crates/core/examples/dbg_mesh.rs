use perfhom::mesh::{build_cell_mesh, mesh_quality_report, CellGeometry};

fn main() {
    for (r, l) in [(0.25, 4u32), (0.25, 5), (0.25, 6), (0.3, 5), (0.15, 5), (0.1, 4), (0.35, 4), (0.2, 6)] {
        let geom = CellGeometry { hole_center: [0.5, 0.5], hole_radius: r, refinement: l };
        match build_cell_mesh(&geom) {
            Ok(mesh) => {
                let q = mesh_quality_report(&mesh);
                let h = geom.grid_step();
                println!("r={r} L={l}: min_angle={:.2} h_max/h={:.4} (bound {:.4}) area={:.6} chi={} nv={} nt={}",
                    q.min_angle_deg, q.h_max / h, 2f64.sqrt(), q.area_sum, q.euler_characteristic, q.num_vertices, q.num_triangles);
            }
            Err(e) => println!("r={r} L={l}: ERROR {e}"),
        }
    }
    // off-center hole
    let geom = CellGeometry { hole_center: [0.4375, 0.5625], hole_radius: 0.2, refinement: 5 };
    match build_cell_mesh(&geom) {
        Ok(mesh) => {
            let q = mesh_quality_report(&mesh);
            println!("offcenter: min_angle={:.2} h_max/h={:.4} chi={}", q.min_angle_deg, q.h_max / geom.grid_step(), q.euler_characteristic);
        }
        Err(e) => println!("offcenter: ERROR {e}"),
    }
}
