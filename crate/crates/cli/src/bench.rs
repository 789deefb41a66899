use std::time::Instant;

use hapbot::acoustics::{field_slice, focus_phases, Axis, SlicePlane, TransducerArray};
use hapbot::geometry::{Point3D, Transform2D};
use hapbot::session::Session;
use hapbot::tracking::{Hand, HandFrame};

use crate::{load_config, BenchArgs};

const RUNS: usize = 5;

fn median(mut xs: Vec<f64>) -> f64 {
    xs.sort_by(f64::total_cmp);
    xs[xs.len() / 2]
}

pub fn run(args: &BenchArgs) -> Result<(), String> {
    if args.ticks == 0 {
        return Err("--ticks must be at least 1".into());
    }
    let config = load_config(args.config.as_deref())?;

    let mut tick_rates = Vec::with_capacity(RUNS);
    for _ in 0..RUNS {
        let mut s = Session::new(config.clone()).map_err(|e| e.to_string())?;
        let start = Instant::now();
        for _ in 0..args.ticks {
            let t = s.time();
            for (hand, phase) in [(Hand::Left, 0.0), (Hand::Right, 3.0)] {
                let pos = Point3D::new(0.275 + 0.15 * (0.5 * t + phase).cos(), 0.275 + 0.15 * (0.7 * t + phase).sin(), 0.15);
                s.push_frame(HandFrame {
                    t,
                    hand,
                    pos,
                    tracked: true,
                })
                .map_err(|e| e.to_string())?;
            }
            s.tick();
        }
        tick_rates.push(args.ticks as f64 / start.elapsed().as_secs_f64());
    }

    let mut array_config = config.clone();
    array_config.array.mount_height = 0.0;
    let array = TransducerArray::from_config(&array_config, Transform2D::IDENTITY);
    let sol = focus_phases(&array, Point3D::new(0.0, 0.0, 0.15)).map_err(|e| e.to_string())?;
    let plane = SlicePlane {
        axis: Axis::Z,
        offset: 0.15,
        center: (0.0, 0.0),
    };
    let mut eval_rates = Vec::with_capacity(RUNS);
    for _ in 0..RUNS {
        let start = Instant::now();
        let grid = field_slice(&array, &sol, plane, (0.1, 0.1), 0.001).map_err(|e| e.to_string())?;
        eval_rates.push((grid.nu * grid.nv) as f64 / start.elapsed().as_secs_f64());
    }

    println!("ticks_per_second {:.1}", median(tick_rates));
    println!("pressure_evaluations_per_second {:.1}", median(eval_rates));
    println!("elements_per_evaluation {}", array.len());
    Ok(())
}
