//! Closed-loop behaviour of one platform under the go-to-pose controller with
//! exact pose feedback.

use hapbot::config::Config;
use hapbot::geometry::{Pose2D, Vec2};
use hapbot::platform::{goto_twist, in_deadband, step_platform, ControlGains, Platform, PlatformLimits};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

struct Loop {
    platform: Platform,
    gains: ControlGains,
    limits: PlatformLimits,
    substeps: usize,
    dt: f64,
}

impl Loop {
    fn new(config: &Config, start: Pose2D, headings: Vec<f64>) -> Self {
        let mounts = config.platform.resolved_mounts();
        let ids = (0..mounts.len() as u32).collect();
        let mut platform = Platform::new(0, start, mounts, ids, config.platform.footprint_half_extent);
        platform.headings = headings;
        Self {
            platform,
            gains: ControlGains::from_config(config),
            limits: PlatformLimits::from_config(config),
            substeps: config.rates.substeps(),
            dt: config.rates.control_dt(),
        }
    }

    /// One control tick; returns the largest module heading error seen at its start.
    fn tick(&mut self, target: &Pose2D) -> f64 {
        let twist = goto_twist(&self.platform.pose, target, &self.gains);
        let h = self.dt / self.substeps as f64;
        let mut first_error = None;
        for _ in 0..self.substeps {
            let (next, report) = step_platform(&self.platform, &self.limits, &twist, h).unwrap();
            first_error.get_or_insert(report.allocation.max_heading_error());
            self.platform = next;
        }
        first_error.unwrap()
    }
}

fn random_case(rng: &mut ChaCha8Rng, ws: &hapbot::geometry::Rect) -> (Pose2D, Pose2D, Vec<f64>) {
    let pick = |rng: &mut ChaCha8Rng| Vec2::new(rng.random_range(ws.min.x..=ws.max.x), rng.random_range(ws.min.y..=ws.max.y));
    let (a, b) = (pick(rng), pick(rng));
    let start = Pose2D::new(a.x, a.y, rng.random_range(-3.0..3.0));
    let target = Pose2D::new(b.x, b.y, rng.random_range(-3.0..3.0));
    let headings = (0..2).map(|_| rng.random_range(-3.0..3.0)).collect();
    (start, target, headings)
}

#[test]
fn enters_deadband_within_five_seconds_and_stays() {
    let config = Config::default();
    let ws = config.platform_workspace();
    let mut rng = ChaCha8Rng::seed_from_u64(31);
    let mut slowest: f64 = 0.0;
    for case in 0..200 {
        let (start, target, headings) = random_case(&mut rng, &ws);
        // include the two corner-to-corner extremes
        let (start, target) = match case {
            0 => (Pose2D::new(ws.min.x, ws.min.y, 0.0), Pose2D::new(ws.max.x, ws.max.y, 0.0)),
            1 => (Pose2D::new(ws.max.x, ws.min.y, 3.0), Pose2D::new(ws.min.x, ws.max.y, -3.0)),
            _ => (start, target),
        };
        assert!(start.position().distance(target.position()) <= 0.78);
        let mut lp = Loop::new(&config, start, headings);
        let mut entered = None;
        for n in 0..500 {
            lp.tick(&target);
            let inside = in_deadband(&lp.platform.pose, &target, &lp.gains);
            match entered {
                None if inside => entered = Some(n + 1),
                Some(_) => assert!(inside, "case {case} left the deadband at tick {}", n + 1),
                None => {}
            }
        }
        let ticks = entered.unwrap_or_else(|| panic!("case {case} never entered the deadband"));
        let t = ticks as f64 * lp.dt;
        assert!(t <= 5.0, "case {case} took {t} s");
        slowest = slowest.max(t);
    }
    assert!(slowest > 1.0);
}

#[test]
fn distance_never_grows_once_modules_are_aligned() {
    let config = Config::default();
    let ws = config.platform_workspace();
    let mut rng = ChaCha8Rng::seed_from_u64(32);
    let limit = 5f64.to_radians();
    let mut checked = 0;
    for case in 0..200 {
        let (start, target, headings) = random_case(&mut rng, &ws);
        let mut lp = Loop::new(&config, start, headings);
        for n in 0..300 {
            let before = lp.platform.pose.position().distance(target.position());
            let err = lp.tick(&target);
            let after = lp.platform.pose.position().distance(target.position());
            if err < limit {
                checked += 1;
                assert!(after <= before + 1e-12, "case {case} tick {n}: {before} -> {after}");
            }
        }
    }
    assert!(checked > 10_000);
}
