use std::f64::consts::TAU;

use serde::{Deserialize, Serialize};

use super::AcousticsError;
use crate::config::{Config, FrustumConfig};
use crate::geometry::{wrap_positive, Point3D, Transform2D, Vec2};

/// Quality falls to zero once the delivered focus misses the request by this much.
pub const QUALITY_SCALE: f64 = 0.1;

/// Rectangular grid of circular piston emitters facing +z.
///
/// Elements are indexed row-major (`row * cols + col`) and centered on the
/// array origin in its local frame; `pose` places that origin on the mat and
/// `mount_height` lifts the emitting surface above it.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TransducerArray {
    pub rows: usize,
    pub cols: usize,
    pub pitch: f64,
    pub element_radius: f64,
    pub frequency: f64,
    pub speed_of_sound: f64,
    pub reference_amplitude: f64,
    pub pose: Transform2D,
    pub mount_height: f64,
    pub min_focus_height: f64,
}

impl TransducerArray {
    pub fn from_config(config: &Config, pose: Transform2D) -> Self {
        let a = &config.array;
        Self {
            rows: a.rows,
            cols: a.cols,
            pitch: a.pitch,
            element_radius: a.element_radius,
            frequency: a.frequency,
            speed_of_sound: config.acoustics.speed_of_sound,
            reference_amplitude: a.reference_amplitude,
            pose,
            mount_height: a.mount_height,
            min_focus_height: a.min_focus_height,
        }
    }

    pub fn len(&self) -> usize {
        self.rows * self.cols
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    pub fn wavelength(&self) -> f64 {
        self.speed_of_sound / self.frequency
    }

    pub fn wavenumber(&self) -> f64 {
        TAU * self.frequency / self.speed_of_sound
    }

    pub fn half_extent(&self) -> (f64, f64) {
        (
            0.5 * (self.cols - 1) as f64 * self.pitch + self.element_radius,
            0.5 * (self.rows - 1) as f64 * self.pitch + self.element_radius,
        )
    }

    pub fn local_element(&self, index: usize) -> Vec2 {
        let (r, c) = (index / self.cols, index % self.cols);
        Vec2::new(
            (c as f64 - 0.5 * (self.cols - 1) as f64) * self.pitch,
            (r as f64 - 0.5 * (self.rows - 1) as f64) * self.pitch,
        )
    }

    /// Element centers in world coordinates.
    pub fn element_positions(&self) -> Vec<Point3D> {
        (0..self.len())
            .map(|i| {
                let p = self.pose.apply_point(self.local_element(i));
                Point3D::new(p.x, p.y, self.mount_height)
            })
            .collect()
    }

    pub fn center(&self) -> Point3D {
        Point3D::new(self.pose.translation.x, self.pose.translation.y, self.mount_height)
    }
}

/// Per-element drive realizing one focal point.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PhaseSolution {
    /// Radians in [0, 2π), one per element.
    pub phases: Vec<f64>,
    /// Scale factors in [0, 1].
    pub amplitudes: Vec<f64>,
    /// Focus actually delivered.
    pub focus: Point3D,
    pub requested: Point3D,
    pub quality: f64,
}

impl PhaseSolution {
    pub fn with_uniform_amplitude(mut self, a: f64) -> Self {
        self.amplitudes.iter_mut().for_each(|x| *x = a);
        self
    }
}

/// Phases that bring every element's wave into phase at `focus`:
/// `phase_i = -k * d_i` wrapped into [0, 2π).
pub fn focus_phases(array: &TransducerArray, focus: Point3D) -> Result<PhaseSolution, AcousticsError> {
    if !focus.is_finite() {
        return Err(AcousticsError::NonFinitePoint);
    }
    let height = focus.z - array.mount_height;
    if height <= 0.0 {
        return Err(AcousticsError::FocusBelowArray { height });
    }
    if height < array.min_focus_height {
        return Err(AcousticsError::FocusTooClose {
            height,
            min: array.min_focus_height,
        });
    }
    Ok(phases_unchecked(array, focus, focus, 1.0))
}

fn phases_unchecked(array: &TransducerArray, focus: Point3D, requested: Point3D, quality: f64) -> PhaseSolution {
    let k = array.wavenumber();
    let phases = array
        .element_positions()
        .iter()
        .map(|e| wrap_positive(-k * e.distance(&focus)))
        .collect();
    PhaseSolution {
        phases,
        amplitudes: vec![1.0; array.len()],
        focus,
        requested,
        quality,
    }
}

/// Clamps a request into the serviceable frustum above the array, then focuses there.
///
/// Lateral limits are taken in the array's own frame: the element footprint
/// plus `lateral_margin` on each side. Height is measured from the emitting
/// surface. Quality decays linearly with the miss distance.
pub fn resolve_focus(array: &TransducerArray, frustum: &FrustumConfig, requested: Point3D) -> PhaseSolution {
    let delivered = clamp_to_frustum(array, frustum, requested);
    let miss = delivered.distance(&requested);
    let quality = if miss == 0.0 {
        1.0
    } else {
        (1.0 - miss / QUALITY_SCALE).max(0.0)
    };
    phases_unchecked(array, delivered, requested, quality)
}

pub fn clamp_to_frustum(array: &TransducerArray, frustum: &FrustumConfig, requested: Point3D) -> Point3D {
    let (hx, hy) = array.half_extent();
    let (lx, ly) = (hx + frustum.lateral_margin, hy + frustum.lateral_margin);
    let inv = array.pose.inverse();
    let local = inv.apply_point(requested.lateral());
    let clamped_local = Vec2::new(local.x.clamp(-lx, lx), local.y.clamp(-ly, ly));
    let lateral = if clamped_local == local {
        requested.lateral()
    } else {
        array.pose.apply_point(clamped_local)
    };
    let z_lo = array.mount_height + frustum.z_min.max(array.min_focus_height);
    let z_hi = array.mount_height + frustum.z_max;
    let z = if requested.z.is_nan() { z_lo } else { requested.z.clamp(z_lo, z_hi.max(z_lo)) };
    Point3D::new(lateral.x, lateral.y, z)
}

#[cfg(test)]
mod tests {
    use super::*;

    pub(crate) fn two_element_array() -> TransducerArray {
        // elements at x = 0 and x = 0.010, surface at z = 0
        TransducerArray {
            rows: 1,
            cols: 2,
            pitch: 0.010,
            element_radius: 0.0045,
            frequency: 40_000.0,
            speed_of_sound: 346.0,
            reference_amplitude: 1.0,
            pose: Transform2D::translation(0.005, 0.0),
            mount_height: 0.0,
            min_focus_height: 0.02,
        }
    }

    fn default_array() -> TransducerArray {
        TransducerArray::from_config(&Config::default(), Transform2D::IDENTITY)
    }

    #[test]
    fn element_layout() {
        let a = two_element_array();
        let e = a.element_positions();
        assert!((e[0].x - 0.0).abs() < 1e-15 && (e[1].x - 0.010).abs() < 1e-15);
        let d = default_array();
        assert_eq!(d.len(), 256);
        assert!((d.wavelength() - 0.00865).abs() < 1e-12);
        let (hx, hy) = d.half_extent();
        assert!((hx - 0.0795).abs() < 1e-12 && (hy - 0.0795).abs() < 1e-12);
    }

    #[test]
    fn two_element_phase_difference() {
        // extended-precision reference: k*dd mod 2π with k = 2π*40000/346
        const ORACLE: f64 = 0.362_286_439_090_443_472_465_324_941_040_5;
        let a = two_element_array();
        assert!((a.wavenumber() - 726.379_804_298_218_1).abs() < 1e-9);
        let s = focus_phases(&a, Point3D::new(0.0, 0.0, 0.100)).unwrap();
        let diff = (s.phases[0] - s.phases[1]).rem_euclid(TAU);
        assert!((diff - ORACLE).abs() < 1e-10, "{diff}");
        assert!((diff - 0.36229).abs() < 1e-4);
    }

    #[test]
    fn axial_focus_is_symmetric() {
        let a = default_array();
        let s = focus_phases(&a, Point3D::new(0.0, 0.0, 0.18)).unwrap();
        let n = a.len();
        for i in 0..n {
            // point reflection through the array center
            let mirror = n - 1 - i;
            assert!((s.phases[i] - s.phases[mirror]).abs() < 1e-9);
            let (r, c) = (i / 16, i % 16);
            let mirror_x = r * 16 + (15 - c);
            assert!((s.phases[i] - s.phases[mirror_x]).abs() < 1e-9);
        }
        assert!(s.phases.iter().all(|p| (0.0..TAU).contains(p)));
        assert_eq!(s.quality, 1.0);
        assert!(s.amplitudes.iter().all(|&x| x == 1.0));
    }

    #[test]
    fn rejects_degenerate_focus() {
        let a = two_element_array();
        assert!(matches!(
            focus_phases(&a, Point3D::new(0.0, 0.0, 0.0)),
            Err(AcousticsError::FocusBelowArray { .. })
        ));
        assert!(matches!(
            focus_phases(&a, Point3D::new(0.0, 0.0, 0.01)),
            Err(AcousticsError::FocusTooClose { .. })
        ));
        assert!(focus_phases(&a, Point3D::new(f64::NAN, 0.0, 0.1)).is_err());
    }

    #[test]
    fn resolve_inside_frustum() {
        let a = default_array();
        let fr = FrustumConfig::default();
        let req = Point3D::new(0.05, -0.03, 0.20);
        let s = resolve_focus(&a, &fr, req);
        assert_eq!(s.focus, req);
        assert_eq!(s.quality, 1.0);
    }

    #[test]
    fn resolve_lateral_miss_halves_quality() {
        let a = default_array();
        let fr = FrustumConfig::default();
        // lateral limit is 0.0795 + 0.05 = 0.1295
        let req = Point3D::new(0.1295 + 0.05, 0.0, 0.20);
        let s = resolve_focus(&a, &fr, req);
        assert!((s.focus.x - 0.1295).abs() < 1e-12);
        assert!((s.quality - 0.5).abs() < 1e-9);
    }

    #[test]
    fn resolve_clamps_componentwise() {
        let fr = FrustumConfig { z_max: 0.40, ..Default::default() };
        let mut a = default_array();
        a.pose = Transform2D::new(0.3, 0.2, 0.0);
        a.mount_height = 0.03;
        let req = Point3D::new(0.3 + 0.16, 0.2 - 0.02, 0.70);
        let s = resolve_focus(&a, &fr, req);
        // independent componentwise clamp
        let want = Point3D::new(0.3 + 0.1295, 0.18, 0.03 + 0.40);
        assert!(s.focus.distance(&want) < 1e-12);
        let miss = ((0.16f64 - 0.1295).powi(2) + (0.70f64 - 0.43).powi(2)).sqrt();
        assert!((s.quality - (1.0 - miss / 0.1).max(0.0)).abs() < 1e-12);
        assert_eq!(s.quality, 0.0);
    }

    #[test]
    fn resolve_respects_array_rotation() {
        let fr = FrustumConfig::default();
        let mut a = default_array();
        a.pose = Transform2D::new(0.0, 0.0, std::f64::consts::FRAC_PI_4);
        // along the rotated diagonal both local axes are limited to 0.1295
        let req = Point3D::new(0.0, 0.5, 0.2);
        let s = resolve_focus(&a, &fr, req);
        let local = a.pose.inverse().apply_point(s.focus.lateral());
        assert!(local.x.abs() <= 0.1295 + 1e-12 && local.y.abs() <= 0.1295 + 1e-12);
        assert!(s.quality < 1.0);
    }
}
