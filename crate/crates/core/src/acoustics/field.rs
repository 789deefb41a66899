use std::fmt::Write as _;

use num_complex::Complex64;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::array::{PhaseSolution, TransducerArray};
use super::bessel::piston_directivity;
use super::AcousticsError;
use crate::format::sig9;
use crate::geometry::Point3D;

pub const MAX_GRID_SAMPLES: usize = 1_000_000;

/// Neumaier-compensated accumulator.
#[derive(Debug, Default, Clone, Copy)]
struct Compensated {
    sum: f64,
    carry: f64,
}

impl Compensated {
    fn add(&mut self, x: f64) {
        let t = self.sum + x;
        if self.sum.abs() >= x.abs() {
            self.carry += (self.sum - t) + x;
        } else {
            self.carry += (x - t) + self.sum;
        }
        self.sum = t;
    }

    fn value(&self) -> f64 {
        self.sum + self.carry
    }
}

fn check_lengths(array: &TransducerArray, solution: &PhaseSolution) -> Result<(), AcousticsError> {
    if solution.phases.len() != array.len() || solution.amplitudes.len() != array.len() {
        return Err(AcousticsError::LengthMismatch {
            expected: array.len(),
            phases: solution.phases.len(),
            amplitudes: solution.amplitudes.len(),
        });
    }
    Ok(())
}

/// Each element's complex contribution at `point`, in element order.
pub fn pressure_terms(
    array: &TransducerArray,
    solution: &PhaseSolution,
    point: Point3D,
) -> Result<Vec<Complex64>, AcousticsError> {
    check_lengths(array, solution)?;
    if !point.is_finite() {
        return Err(AcousticsError::NonFinitePoint);
    }
    let k = array.wavenumber();
    let ka = k * array.element_radius;
    array
        .element_positions()
        .iter()
        .zip(solution.phases.iter().zip(&solution.amplitudes))
        .enumerate()
        .map(|(i, (e, (&phase, &amp)))| {
            let d = e.distance(&point);
            if d == 0.0 {
                return Err(AcousticsError::CoincidentWithElement { index: i });
            }
            let lateral = e.lateral().distance(point.lateral());
            let directivity = piston_directivity(ka * lateral / d);
            let magnitude = amp * array.reference_amplitude * directivity / d;
            Ok(Complex64::from_polar(magnitude, k * d + phase))
        })
        .collect()
}

/// Complex pressure at `point`: linear superposition of far-field circular pistons.
pub fn pressure_at(
    array: &TransducerArray,
    solution: &PhaseSolution,
    point: Point3D,
) -> Result<Complex64, AcousticsError> {
    let terms = pressure_terms(array, solution, point)?;
    let (mut re, mut im) = (Compensated::default(), Compensated::default());
    for t in &terms {
        re.add(t.re);
        im.add(t.im);
    }
    Ok(Complex64::new(re.value(), im.value()))
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Axis {
    X,
    Y,
    Z,
}

impl Axis {
    /// Names of the in-plane (u, v) coordinates.
    pub fn plane_axes(self) -> (&'static str, &'static str) {
        match self {
            Axis::X => ("y", "z"),
            Axis::Y => ("x", "z"),
            Axis::Z => ("x", "y"),
        }
    }
}

/// Axis-normal plane `axis = offset`, with the in-plane grid centered at `center` (u, v).
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SlicePlane {
    pub axis: Axis,
    pub offset: f64,
    pub center: (f64, f64),
}

impl SlicePlane {
    fn point(&self, u: f64, v: f64) -> Point3D {
        match self.axis {
            Axis::X => Point3D::new(self.offset, u, v),
            Axis::Y => Point3D::new(u, self.offset, v),
            Axis::Z => Point3D::new(u, v, self.offset),
        }
    }
}

/// Row-major magnitude grid. Sample `(i, j)` sits at
/// `center + ((i - nu/2) * res, (j - nv/2) * res)` using integer division, so
/// the plane center is always a sample.
#[derive(Debug, Clone, PartialEq)]
pub struct Grid2D {
    pub plane: SlicePlane,
    pub nu: usize,
    pub nv: usize,
    pub resolution: f64,
    pub values: Vec<f64>,
    /// Indices of samples that coincide with an element; their value is NaN.
    pub unset: Vec<usize>,
}

impl Grid2D {
    pub fn sample_coords(&self, i: usize, j: usize) -> (f64, f64) {
        sample_coord(&self.plane, self.nu, self.nv, self.resolution, i, j)
    }

    pub fn get(&self, i: usize, j: usize) -> f64 {
        self.values[j * self.nu + i]
    }

    /// Index (i, j) of the largest finite sample; first one wins ties.
    pub fn argmax(&self) -> Option<(usize, usize)> {
        let mut best: Option<(usize, f64)> = None;
        for (idx, &v) in self.values.iter().enumerate() {
            if v.is_nan() {
                continue;
            }
            if best.is_none_or(|(_, b)| v > b) {
                best = Some((idx, v));
            }
        }
        best.map(|(idx, _)| (idx % self.nu, idx / self.nu))
    }

    pub fn max_value(&self) -> f64 {
        self.values.iter().copied().filter(|v| !v.is_nan()).fold(0.0, f64::max)
    }

    /// Plain-text graymap. Pixel = round(255 * value / max); unset samples and
    /// an all-zero grid map to 0. The top image row is the highest v.
    pub fn to_pgm(&self) -> String {
        let max = self.max_value();
        let mut out = String::new();
        let _ = writeln!(out, "P2");
        let _ = writeln!(
            out,
            "# |p| slice {}={} res={} max={}",
            axis_name(self.plane.axis),
            self.plane.offset,
            self.resolution,
            sig9(max)
        );
        let _ = writeln!(out, "{} {}", self.nu, self.nv);
        let _ = writeln!(out, "255");
        for j in (0..self.nv).rev() {
            let row: Vec<String> = (0..self.nu)
                .map(|i| {
                    let v = self.get(i, j);
                    if v.is_nan() || max <= 0.0 {
                        0
                    } else {
                        (255.0 * v / max).round().clamp(0.0, 255.0) as u8
                    }
                    .to_string()
                })
                .collect();
            let _ = writeln!(out, "{}", row.join(" "));
        }
        out
    }

    /// `u,v,magnitude` rows in storage order, nine significant digits.
    pub fn to_csv(&self) -> String {
        let (u, v) = self.plane.axis.plane_axes();
        let mut out = format!("{u},{v},magnitude\n");
        for j in 0..self.nv {
            for i in 0..self.nu {
                let (a, b) = self.sample_coords(i, j);
                let _ = writeln!(out, "{},{},{}", sig9(a), sig9(b), sig9(self.get(i, j)));
            }
        }
        out
    }
}

fn axis_name(a: Axis) -> &'static str {
    match a {
        Axis::X => "x",
        Axis::Y => "y",
        Axis::Z => "z",
    }
}

fn sample_coord(plane: &SlicePlane, nu: usize, nv: usize, res: f64, i: usize, j: usize) -> (f64, f64) {
    (
        plane.center.0 + (i as f64 - (nu / 2) as f64) * res,
        plane.center.1 + (j as f64 - (nv / 2) as f64) * res,
    )
}

/// Samples |p| over an axis-aligned plane. `extent` is (width, height) in
/// meters; the grid has `round(extent / resolution)` samples per side (at least one).
pub fn field_slice(
    array: &TransducerArray,
    solution: &PhaseSolution,
    plane: SlicePlane,
    extent: (f64, f64),
    resolution: f64,
) -> Result<Grid2D, AcousticsError> {
    if !(resolution > 0.0 && resolution.is_finite()) {
        return Err(AcousticsError::InvalidResolution(resolution));
    }
    if !(extent.0 >= 0.0 && extent.1 >= 0.0 && extent.0.is_finite() && extent.1.is_finite()) {
        return Err(AcousticsError::InvalidExtent);
    }
    let nu = ((extent.0 / resolution).round() as usize).max(1);
    let nv = ((extent.1 / resolution).round() as usize).max(1);
    let samples = nu.checked_mul(nv).unwrap_or(usize::MAX);
    if samples > MAX_GRID_SAMPLES {
        return Err(AcousticsError::OversizedGrid { samples });
    }
    check_lengths(array, solution)?;

    let mut values = vec![0.0; samples];
    // each sample is an independent fixed-order sum, so the grid is identical
    // whatever the thread count
    values.par_chunks_mut(nu).enumerate().for_each(|(j, row)| {
        for (i, out) in row.iter_mut().enumerate() {
            let (u, v) = sample_coord(&plane, nu, nv, resolution, i, j);
            *out = match pressure_at(array, solution, plane.point(u, v)) {
                Ok(p) => p.norm(),
                Err(_) => f64::NAN,
            };
        }
    });
    let unset = values
        .iter()
        .enumerate()
        .filter(|(_, v)| v.is_nan())
        .map(|(i, _)| i)
        .collect();
    Ok(Grid2D {
        plane,
        nu,
        nv,
        resolution,
        values,
        unset,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::acoustics::array::focus_phases;
    use crate::config::Config;
    use crate::geometry::Transform2D;
    use proptest::prelude::*;

    fn surface_array() -> TransducerArray {
        let mut a = TransducerArray::from_config(&Config::default(), Transform2D::IDENTITY);
        a.mount_height = 0.0;
        a
    }

    #[test]
    fn single_element_on_axis() {
        let a = TransducerArray {
            rows: 1,
            cols: 1,
            pitch: 0.01,
            element_radius: 0.0045,
            frequency: 40_000.0,
            speed_of_sound: 346.0,
            reference_amplitude: 2.5,
            pose: Transform2D::IDENTITY,
            mount_height: 0.0,
            min_focus_height: 0.02,
        };
        let sol = PhaseSolution {
            phases: vec![0.7],
            amplitudes: vec![1.0],
            focus: Point3D::default(),
            requested: Point3D::default(),
            quality: 1.0,
        };
        let d = 0.123;
        let p = pressure_at(&a, &sol, Point3D::new(0.0, 0.0, d)).unwrap();
        assert!((p.norm() - 2.5 / d).abs() < 1e-12);
        let want = crate::geometry::wrap(a.wavenumber() * d + 0.7);
        assert!((p.arg() - want).abs() < 1e-9);
    }

    #[test]
    fn focus_sum_is_in_phase() {
        let a = surface_array();
        let f = Point3D::new(0.02, -0.01, 0.15);
        let sol = focus_phases(&a, f).unwrap();
        let terms = pressure_terms(&a, &sol, f).unwrap();
        let magnitude_sum: f64 = terms.iter().map(|t| t.norm()).sum();
        let p = pressure_at(&a, &sol, f).unwrap();
        assert!((p.norm() - magnitude_sum).abs() / magnitude_sum < 1e-12);
    }

    #[test]
    fn probe_matches_extended_precision_sum() {
        // 50-digit term-by-term superposition, probe 5 mm off the focus
        const RE: f64 = 780.577_429_035_327_140_713_060_675_119_6;
        const IM: f64 = 18.486_096_324_155_630_370_359_073_877_87;
        const FOCUS_MAG: f64 = 1288.604_268_960_795_411_322_581_607_571_9;
        let a = surface_array();
        let sol = focus_phases(&a, Point3D::new(0.0, 0.0, 0.15)).unwrap();
        let p = pressure_at(&a, &sol, Point3D::new(0.005, 0.0, 0.15)).unwrap();
        assert!((p.re - RE).abs() / RE < 1e-10, "{p}");
        assert!((p.im - IM).abs() < 1e-8, "{p}");
        let f = pressure_at(&a, &sol, Point3D::new(0.0, 0.0, 0.15)).unwrap();
        assert!((f.norm() - FOCUS_MAG).abs() / FOCUS_MAG < 1e-12);
    }

    #[test]
    fn coincident_point_rejected() {
        let a = surface_array();
        let sol = focus_phases(&a, Point3D::new(0.0, 0.0, 0.1)).unwrap();
        let e = a.element_positions()[3];
        assert!(matches!(
            pressure_at(&a, &sol, e),
            Err(AcousticsError::CoincidentWithElement { index: 3 })
        ));
    }

    #[test]
    fn degenerate_grid_equals_point_value() {
        let a = surface_array();
        let f = Point3D::new(0.0, 0.0, 0.15);
        let sol = focus_phases(&a, f).unwrap();
        let plane = SlicePlane { axis: Axis::Z, offset: 0.15, center: (0.0, 0.0) };
        let g = field_slice(&a, &sol, plane, (0.001, 0.001), 0.001).unwrap();
        assert_eq!((g.nu, g.nv), (1, 1));
        assert_eq!(g.values[0], pressure_at(&a, &sol, f).unwrap().norm());
    }

    #[test]
    fn slice_scales_linearly() {
        let a = surface_array();
        let sol = focus_phases(&a, Point3D::new(0.01, 0.0, 0.12)).unwrap();
        let plane = SlicePlane { axis: Axis::Z, offset: 0.12, center: (0.01, 0.0) };
        let g1 = field_slice(&a, &sol, plane, (0.01, 0.01), 0.001).unwrap();
        let g2 = field_slice(&a, &sol.clone().with_uniform_amplitude(0.25), plane, (0.01, 0.01), 0.001).unwrap();
        for (x, y) in g1.values.iter().zip(&g2.values) {
            assert!((0.25 * x - y).abs() <= 1e-12 * x.abs());
        }
    }

    #[test]
    fn focal_plane_peak_at_focus_cell() {
        let a = surface_array();
        let f = Point3D::new(0.0, 0.0, 0.15);
        let sol = focus_phases(&a, f).unwrap();
        let plane = SlicePlane { axis: Axis::Z, offset: 0.15, center: (0.0, 0.0) };
        let g = field_slice(&a, &sol, plane, (0.06, 0.06), 0.001).unwrap();
        assert_eq!((g.nu, g.nv), (60, 60));
        // exhaustive scan
        let mut best = (0, 0, f64::MIN);
        for j in 0..g.nv {
            for i in 0..g.nu {
                if g.get(i, j) > best.2 {
                    best = (i, j, g.get(i, j));
                }
            }
        }
        assert_eq!((best.0, best.1), (30, 30));
        assert_eq!(g.sample_coords(30, 30), (0.0, 0.0));
        assert_eq!(g.argmax(), Some((30, 30)));
    }

    #[test]
    fn oversized_and_bad_resolution() {
        let a = surface_array();
        let sol = focus_phases(&a, Point3D::new(0.0, 0.0, 0.15)).unwrap();
        let plane = SlicePlane { axis: Axis::Z, offset: 0.15, center: (0.0, 0.0) };
        assert!(matches!(
            field_slice(&a, &sol, plane, (1.1, 1.0), 0.001),
            Err(AcousticsError::OversizedGrid { .. })
        ));
        assert!(matches!(
            field_slice(&a, &sol, plane, (0.1, 0.1), 0.0),
            Err(AcousticsError::InvalidResolution(_))
        ));
    }

    #[test]
    fn slice_through_elements_marks_unset() {
        let a = surface_array();
        let sol = focus_phases(&a, Point3D::new(0.0, 0.0, 0.15)).unwrap();
        // the array surface plane, centered on element (8, 8)
        let c = a.element_positions()[8 * 16 + 8];
        let plane = SlicePlane { axis: Axis::Z, offset: 0.0, center: (c.x, c.y) };
        let g = field_slice(&a, &sol, plane, (0.003, 0.003), 0.001).unwrap();
        assert_eq!(g.unset, vec![4]);
        assert!(g.values[4].is_nan());
        assert!(g.to_csv().lines().nth(5).unwrap().ends_with(','));
        assert!(g.to_pgm().starts_with("P2\n"));
    }

    #[test]
    fn pgm_and_csv_layout() {
        let a = surface_array();
        let sol = focus_phases(&a, Point3D::new(0.0, 0.0, 0.15)).unwrap();
        let plane = SlicePlane { axis: Axis::Z, offset: 0.15, center: (0.0, 0.0) };
        let g = field_slice(&a, &sol, plane, (0.004, 0.002), 0.001).unwrap();
        let pgm = g.to_pgm();
        let lines: Vec<&str> = pgm.lines().collect();
        assert_eq!(lines[2], "4 2");
        assert_eq!(lines[3], "255");
        assert_eq!(lines.len(), 6);
        // max pixel (the focus sample (2, 1)) is on the top row
        assert_eq!(lines[4].split(' ').nth(2), Some("255"));
        let csv = g.to_csv();
        assert_eq!(csv.lines().next(), Some("x,y,magnitude"));
        assert_eq!(csv.lines().count(), 9);
    }

    proptest! {
        #![proptest_config(ProptestConfig::with_cases(64))]

        #[test]
        fn in_phase_at_delivered_focus(x in -0.05..0.05f64, y in -0.05..0.05f64, z in 0.03..0.3f64,
                                       tx in -0.2..0.2f64, rot in -3.0..3.0f64) {
            let mut a = surface_array();
            a.pose = Transform2D::new(tx, 0.0, rot);
            let f = Point3D::new(tx + x, y, z);
            let sol = focus_phases(&a, f).unwrap();
            prop_assert!(sol.phases.iter().all(|p| (0.0..std::f64::consts::TAU).contains(p)));
            let args: Vec<f64> = pressure_terms(&a, &sol, f).unwrap().iter().map(|t| t.arg()).collect();
            let first = args[0];
            for g in &args {
                let d = crate::geometry::wrap(g - first).abs();
                prop_assert!(d < 1e-9, "spread {}", d);
            }
        }

        #[test]
        fn amplitude_linearity(alpha in 0.01..1.0f64, px in -0.05..0.05f64, pz in 0.05..0.3f64) {
            let a = surface_array();
            let sol = focus_phases(&a, Point3D::new(0.0, 0.01, 0.12)).unwrap();
            let probe = Point3D::new(px, 0.0, pz);
            let base = pressure_at(&a, &sol, probe).unwrap();
            let scaled = pressure_at(&a, &sol.clone().with_uniform_amplitude(alpha), probe).unwrap();
            prop_assert!((scaled - base * alpha).norm() <= 1e-12 * (base * alpha).norm().max(1e-300) + 1e-12);
        }

        #[test]
        fn element_order_does_not_matter(seed in 0u64..1000, pz in 0.05..0.3f64) {
            use rand::{seq::SliceRandom, SeedableRng};
            let a = surface_array();
            let sol = focus_phases(&a, Point3D::new(0.0, 0.0, 0.15)).unwrap();
            let probe = Point3D::new(0.013, -0.004, pz);
            let terms = pressure_terms(&a, &sol, probe).unwrap();
            let mut shuffled = terms.clone();
            shuffled.shuffle(&mut rand_chacha::ChaCha8Rng::seed_from_u64(seed));
            let sum = |ts: &[Complex64]| {
                let (mut re, mut im) = (Compensated::default(), Compensated::default());
                for t in ts { re.add(t.re); im.add(t.im); }
                Complex64::new(re.value(), im.value())
            };
            let (p, q) = (sum(&terms), sum(&shuffled));
            prop_assert!((p - q).norm() <= 1e-12 * p.norm());
            prop_assert_eq!(p, pressure_at(&a, &sol, probe).unwrap());
        }
    }
}
