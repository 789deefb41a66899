use hapbot::acoustics::{field_slice, focus_phases, Axis, SlicePlane, TransducerArray};
use hapbot::geometry::{Point3D, Transform2D};

use crate::{load_config, FieldArgs};

pub fn run(args: &FieldArgs) -> Result<(), String> {
    let mut config = load_config(args.config.as_deref())?;
    config.array.mount_height = 0.0;
    let array = TransducerArray::from_config(&config, Transform2D::IDENTITY);
    let [x, y, z] = args.focus;
    let sol = focus_phases(&array, Point3D::new(x, y, z)).map_err(|e| e.to_string())?;
    let (axis, offset) = args.plane;
    let plane = match axis {
        'x' => SlicePlane {
            axis: Axis::X,
            offset,
            center: (y, z),
        },
        'y' => SlicePlane {
            axis: Axis::Y,
            offset,
            center: (x, z),
        },
        _ => SlicePlane {
            axis: Axis::Z,
            offset,
            center: (x, y),
        },
    };
    let grid = field_slice(&array, &sol, plane, (args.extent, args.extent), args.res).map_err(|e| e.to_string())?;
    std::fs::write(&args.out, grid.to_pgm()).map_err(|e| format!("{}: {e}", args.out.display()))?;
    if let Some(path) = &args.csv {
        std::fs::write(path, grid.to_csv()).map_err(|e| format!("{}: {e}", path.display()))?;
    }
    if let Some((i, j)) = grid.argmax() {
        let (u, v) = grid.sample_coords(i, j);
        println!("{}x{} samples, peak {:.6e} at ({u:.6}, {v:.6})", grid.nu, grid.nv, grid.max_value());
    }
    Ok(())
}
