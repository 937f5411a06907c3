//! Synthetic dynamic phantom: a piecewise-constant body of ellipses with one
//! structure that translates and dilates and one region whose intensity
//! pulses.

use std::f64::consts::PI;

use rand::Rng;

use crate::io::{DType, Dataset};
use crate::rng;
use crate::{Complex64, ComplexImage, Error, Result};

/// Frames per motion cycle.
pub const PERIOD: f64 = 10.0;

#[derive(Debug, Clone, Copy)]
struct Ellipse {
    cx: f64,
    cy: f64,
    ax: f64,
    ay: f64,
    angle: f64,
    value: f64,
}

impl Ellipse {
    fn contains(&self, x: f64, y: f64) -> bool {
        let (s, c) = self.angle.sin_cos();
        let dx = x - self.cx;
        let dy = y - self.cy;
        let u = (c * dx + s * dy) / self.ax;
        let v = (-s * dx + c * dy) / self.ay;
        u * u + v * v <= 1.0
    }
}

struct Layout {
    body: Ellipse,
    statics: [Ellipse; 3],
    mover: Ellipse,
    pulse: Ellipse,
    phase_move: f64,
    phase_pulse: f64,
}

impl Layout {
    fn draw(rng: &mut impl Rng) -> Self {
        let mut j = |scale: f64| scale * (2.0 * rng.random::<f64>() - 1.0);
        Layout {
            body: Ellipse { cx: 0.0, cy: 0.0, ax: 0.86, ay: 0.72, angle: j(0.05), value: 0.35 },
            statics: [
                Ellipse { cx: -0.5 + j(0.03), cy: 0.1 + j(0.03), ax: 0.14, ay: 0.26, angle: 0.3 + j(0.1), value: 0.6 },
                Ellipse { cx: 0.55 + j(0.03), cy: 0.3 + j(0.03), ax: 0.12, ay: 0.08, angle: j(0.3), value: 0.15 },
                Ellipse { cx: 0.05 + j(0.03), cy: -0.5 + j(0.03), ax: 0.3, ay: 0.07, angle: j(0.1), value: 0.75 },
            ],
            mover: Ellipse { cx: 0.12 + j(0.03), cy: 0.02 + j(0.03), ax: 0.25, ay: 0.2, angle: 0.2 + j(0.1), value: 0.95 },
            pulse: Ellipse { cx: -0.12 + j(0.03), cy: 0.45 + j(0.03), ax: 0.13, ay: 0.1, angle: j(0.3), value: 0.5 },
            phase_move: 2.0 * PI * rng.random::<f64>(),
            phase_pulse: 2.0 * PI * rng.random::<f64>(),
        }
    }

    fn frame(&self, side: usize, t: usize, amplitude: f64) -> ComplexImage {
        let w = 2.0 * PI * t as f64 / PERIOD;
        let m = (w + self.phase_move).sin();
        let mut mover = self.mover;
        mover.cx += 0.03 * amplitude * m;
        mover.cy += 0.02 * amplitude * (w + self.phase_move + 1.0).sin();
        mover.ax *= 1.0 + 0.06 * amplitude * m;
        mover.ay *= 1.0 + 0.06 * amplitude * m;
        let mut pulse = self.pulse;
        pulse.value += 0.1 * amplitude * (w + self.phase_pulse).sin();
        let layers: Vec<Ellipse> = std::iter::once(self.body)
            .chain(self.statics.iter().copied())
            .chain([mover, pulse])
            .collect();
        ComplexImage::from_fn(side, |r, c| {
            let x = (2 * c + 1) as f64 / side as f64 - 1.0;
            let y = (2 * r + 1) as f64 / side as f64 - 1.0;
            let v = layers
                .iter()
                .rev()
                .find(|e| e.contains(x, y))
                .map_or(0.0, |e| e.value);
            Complex64::new(v, 0.0)
        })
    }
}

/// Generates a real-valued phantom sequence with magnitudes in `[0, 1]`.
/// `motion_amplitude = 0` gives identical frames; 1 is the nominal motion.
pub fn generate_phantom(side: usize, frames: usize, motion_amplitude: f64, seed: u64) -> Result<Dataset> {
    if !side.is_power_of_two() || side < 8 {
        return Err(Error::param(format!("phantom side {side} must be a power of two ≥ 8")));
    }
    if frames == 0 {
        return Err(Error::param("phantom needs at least one frame"));
    }
    if !(motion_amplitude >= 0.0 && motion_amplitude <= 2.0) {
        return Err(Error::param(format!(
            "motion amplitude {motion_amplitude} must lie in [0, 2]"
        )));
    }
    let mut rng = rng::stream(seed, &[rng::TAG_PHANTOM]);
    let layout = Layout::draw(&mut rng);
    let images: Vec<ComplexImage> = (0..frames).map(|t| layout.frame(side, t, motion_amplitude)).collect();
    Dataset::from_images(&images, DType::Real32, 1.0)
}

/// `‖x_t − x_{t−1}‖ / ‖x_t‖` for `t = 1..T−1`.
pub fn adjacent_changes(frames: &[ComplexImage]) -> Vec<f64> {
    frames
        .windows(2)
        .map(|w| w[1].distance(&w[0]) / w[1].norm())
        .collect()
}
