use serde::Serialize;

use super::field::PlanarField;

const A: [[f64; 6]; 7] = [
    [0.0; 6],
    [1.0 / 5.0, 0.0, 0.0, 0.0, 0.0, 0.0],
    [3.0 / 40.0, 9.0 / 40.0, 0.0, 0.0, 0.0, 0.0],
    [44.0 / 45.0, -56.0 / 15.0, 32.0 / 9.0, 0.0, 0.0, 0.0],
    [19372.0 / 6561.0, -25360.0 / 2187.0, 64448.0 / 6561.0, -212.0 / 729.0, 0.0, 0.0],
    [9017.0 / 3168.0, -355.0 / 33.0, 46732.0 / 5247.0, 49.0 / 176.0, -5103.0 / 18656.0, 0.0],
    [35.0 / 384.0, 0.0, 500.0 / 1113.0, 125.0 / 192.0, -2187.0 / 6784.0, 11.0 / 84.0],
];
const B5: [f64; 7] = [35.0 / 384.0, 0.0, 500.0 / 1113.0, 125.0 / 192.0, -2187.0 / 6784.0, 11.0 / 84.0, 0.0];
const B4: [f64; 7] = [
    5179.0 / 57600.0,
    0.0,
    7571.0 / 16695.0,
    393.0 / 640.0,
    -92097.0 / 339200.0,
    187.0 / 2100.0,
    1.0 / 40.0,
];

pub(crate) const H_MIN: f64 = 1e-12;

/// One Dormand–Prince 5(4) step: the fifth-order solution and the scaled
/// error norm.
pub(crate) fn dp_step(f: &dyn PlanarField, y: [f64; 2], h: f64, tol: f64) -> ([f64; 2], f64) {
    let mut k = [[0.0; 2]; 7];
    for s in 0..7 {
        let mut p = y;
        for (j, a) in A[s].iter().enumerate().take(s) {
            p[0] += h * a * k[j][0];
            p[1] += h * a * k[j][1];
        }
        k[s] = f.eval(p);
    }
    let mut y5 = y;
    let mut err: f64 = 0.0;
    for c in 0..2 {
        let mut e = 0.0;
        for s in 0..7 {
            y5[c] += h * B5[s] * k[s][c];
            e += h * (B5[s] - B4[s]) * k[s][c];
        }
        let scale = tol + tol * y[c].abs().max(y5[c].abs());
        err = err.max((e / scale).abs());
    }
    if !(y5[0].is_finite() && y5[1].is_finite()) {
        err = f64::INFINITY;
    }
    (y5, err)
}

/// Adaptive integrator state.
pub(crate) struct Stepper<'a> {
    pub field: &'a dyn PlanarField,
    pub tol: f64,
    pub t: f64,
    pub y: [f64; 2],
    pub h: f64,
}

impl<'a> Stepper<'a> {
    pub fn new(field: &'a dyn PlanarField, y: [f64; 2], tol: f64) -> Stepper<'a> {
        Stepper {
            field,
            tol,
            t: 0.0,
            y,
            h: 1e-3,
        }
    }

    /// Takes one accepted step no longer than `hmax`; `None` on step-size
    /// underflow.
    pub fn advance(&mut self, hmax: f64) -> Option<(f64, [f64; 2])> {
        let mut h = self.h.min(hmax);
        loop {
            let (y5, err) = dp_step(self.field, self.y, h, self.tol);
            let factor = if err == 0.0 { 5.0 } else { (0.9 * err.powf(-0.2)).clamp(0.2, 5.0) };
            if err <= 1.0 {
                let used = h;
                self.t += h;
                self.y = y5;
                self.h = (h * factor).max(H_MIN);
                return Some((used, y5));
            }
            h *= factor.min(0.9);
            if h < H_MIN {
                return None;
            }
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum FlowStatus {
    Completed,
    /// Step size underflowed, typically at a singularity.
    Captured,
}

/// Accepted steps in lift coordinates, starting with the initial point.
#[derive(Debug, Clone, Serialize)]
pub struct Trajectory {
    pub times: Vec<f64>,
    pub points: Vec<[f64; 2]>,
    pub status: FlowStatus,
}

impl Trajectory {
    pub fn end(&self) -> [f64; 2] {
        *self.points.last().expect("trajectory holds its initial point")
    }

    /// The end point reduced to `[0,1)²`.
    pub fn end_wrapped(&self) -> [f64; 2] {
        let p = self.end();
        [p[0].rem_euclid(1.0), p[1].rem_euclid(1.0)]
    }
}

/// Integrates `X` from `x0` over `[0, t_end]` with per-step error `≤ tol`.
pub fn flow(field: &dyn PlanarField, x0: [f64; 2], t_end: f64, tol: f64) -> Trajectory {
    let mut st = Stepper::new(field, x0, tol);
    let mut times = vec![0.0];
    let mut points = vec![x0];
    let mut status = FlowStatus::Completed;
    let slack = 1e-14 * t_end.abs().max(1.0);
    while st.t < t_end - slack {
        match st.advance(t_end - st.t) {
            Some((_, y)) => {
                times.push(st.t);
                points.push(y);
            }
            None => {
                status = FlowStatus::Captured;
                break;
            }
        }
    }
    Trajectory { times, points, status }
}

#[cfg(test)]
mod tests {
    use super::*;

    struct Constant([f64; 2]);

    impl PlanarField for Constant {
        fn eval(&self, _: [f64; 2]) -> [f64; 2] {
            self.0
        }
    }

    struct Rotation;

    impl PlanarField for Rotation {
        fn eval(&self, p: [f64; 2]) -> [f64; 2] {
            [-p[1], p[0]]
        }
    }

    #[test]
    fn linear_flow() {
        let a = 0.618;
        let t = flow(&Constant([1.0, a]), [0.0, 0.0], 1.0, 1e-10);
        assert_eq!(t.status, FlowStatus::Completed);
        let e = t.end_wrapped();
        assert!(e[0].min(1.0 - e[0]) < 1e-12 && (e[1] - a).abs() < 1e-12);
        assert!((t.times.last().unwrap() - 1.0).abs() < 1e-12);
        let still = flow(&Constant([0.0, 0.0]), [0.3, 0.4], 2.0, 1e-10);
        assert_eq!(still.end(), [0.3, 0.4]);
    }

    #[test]
    fn accuracy_against_closed_form() {
        let t = flow(&Rotation, [1.0, 0.0], 2.0, 1e-10);
        let e = t.end();
        assert!((e[0] - 2f64.cos()).abs() < 1e-8 && (e[1] - 2f64.sin()).abs() < 1e-8);
    }
}
