//! Runge-Kutta-Fehlberg 7(8) with adaptive step control.
//!
//! Thirteen stages; the eighth-order solution is propagated and the
//! difference to the embedded seventh-order one drives the step size.

const C: [f64; 13] = [
    0.0,
    2.0 / 27.0,
    1.0 / 9.0,
    1.0 / 6.0,
    5.0 / 12.0,
    1.0 / 2.0,
    5.0 / 6.0,
    1.0 / 6.0,
    2.0 / 3.0,
    1.0 / 3.0,
    1.0,
    0.0,
    1.0,
];

const A: [[f64; 12]; 13] = [
    [0.0; 12],
    [2.0 / 27.0, 0.0, 0.0, 0.0, 0.0, 0.0, 0.0, 0.0, 0.0, 0.0, 0.0, 0.0],
    [1.0 / 36.0, 1.0 / 12.0, 0.0, 0.0, 0.0, 0.0, 0.0, 0.0, 0.0, 0.0, 0.0, 0.0],
    [1.0 / 24.0, 0.0, 1.0 / 8.0, 0.0, 0.0, 0.0, 0.0, 0.0, 0.0, 0.0, 0.0, 0.0],
    [5.0 / 12.0, 0.0, -25.0 / 16.0, 25.0 / 16.0, 0.0, 0.0, 0.0, 0.0, 0.0, 0.0, 0.0, 0.0],
    [1.0 / 20.0, 0.0, 0.0, 1.0 / 4.0, 1.0 / 5.0, 0.0, 0.0, 0.0, 0.0, 0.0, 0.0, 0.0],
    [-25.0 / 108.0, 0.0, 0.0, 125.0 / 108.0, -65.0 / 27.0, 125.0 / 54.0, 0.0, 0.0, 0.0, 0.0, 0.0, 0.0],
    [31.0 / 300.0, 0.0, 0.0, 0.0, 61.0 / 225.0, -2.0 / 9.0, 13.0 / 900.0, 0.0, 0.0, 0.0, 0.0, 0.0],
    [2.0, 0.0, 0.0, -53.0 / 6.0, 704.0 / 45.0, -107.0 / 9.0, 67.0 / 90.0, 3.0, 0.0, 0.0, 0.0, 0.0],
    [
        -91.0 / 108.0,
        0.0,
        0.0,
        23.0 / 108.0,
        -976.0 / 135.0,
        311.0 / 54.0,
        -19.0 / 60.0,
        17.0 / 6.0,
        -1.0 / 12.0,
        0.0,
        0.0,
        0.0,
    ],
    [
        2383.0 / 4100.0,
        0.0,
        0.0,
        -341.0 / 164.0,
        4496.0 / 1025.0,
        -301.0 / 82.0,
        2133.0 / 4100.0,
        45.0 / 82.0,
        45.0 / 164.0,
        18.0 / 41.0,
        0.0,
        0.0,
    ],
    [3.0 / 205.0, 0.0, 0.0, 0.0, 0.0, -6.0 / 41.0, -3.0 / 205.0, -3.0 / 41.0, 3.0 / 41.0, 6.0 / 41.0, 0.0, 0.0],
    [
        -1777.0 / 4100.0,
        0.0,
        0.0,
        -341.0 / 164.0,
        4496.0 / 1025.0,
        -289.0 / 82.0,
        2193.0 / 4100.0,
        51.0 / 82.0,
        33.0 / 164.0,
        12.0 / 41.0,
        0.0,
        1.0,
    ],
];

const B8: [f64; 13] = [
    0.0,
    0.0,
    0.0,
    0.0,
    0.0,
    34.0 / 105.0,
    9.0 / 35.0,
    9.0 / 35.0,
    9.0 / 280.0,
    9.0 / 280.0,
    0.0,
    41.0 / 840.0,
    41.0 / 840.0,
];

/// y8 − y7 = (41/840)(k0 + k10 − k11 − k12) h.
const ERR: [(usize, f64); 4] = [(0, 41.0 / 840.0), (10, 41.0 / 840.0), (11, -41.0 / 840.0), (12, -41.0 / 840.0)];

/// A first-order system y′ = f(s, y) of fixed dimension.
pub trait System<const N: usize> {
    fn derivative(&self, s: f64, y: &[f64; N], dy: &mut [f64; N]);

    /// Error scale of each component; the step is accepted when
    /// max |err_i| / scale_i ≤ 1.
    fn error_scale(&self, y: &[f64; N], y_new: &[f64; N], rtol: f64, scale: &mut [f64; N]);
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum StepResult {
    Accepted { h_used: f64, h_next: f64 },
    Rejected { h_next: f64 },
}

/// One attempted step of size `h` from (s, y). On acceptance `y` is updated.
pub fn try_step<const N: usize, S: System<N>>(sys: &S, s: f64, y: &mut [f64; N], h: f64, rtol: f64) -> StepResult {
    let mut k = [[0.0; N]; 13];
    let mut tmp = [0.0; N];
    sys.derivative(s, y, &mut k[0]);
    for stage in 1..13 {
        for i in 0..N {
            let mut acc = 0.0;
            for (j, a) in A[stage][..stage].iter().enumerate() {
                if *a != 0.0 {
                    acc += a * k[j][i];
                }
            }
            tmp[i] = y[i] + h * acc;
        }
        sys.derivative(s + C[stage] * h, &tmp, &mut k[stage]);
    }

    let mut y_new = [0.0; N];
    let mut err = [0.0; N];
    for i in 0..N {
        let mut acc = 0.0;
        for (j, b) in B8.iter().enumerate() {
            if *b != 0.0 {
                acc += b * k[j][i];
            }
        }
        y_new[i] = y[i] + h * acc;
        err[i] = h * ERR.iter().map(|&(j, e)| e * k[j][i]).sum::<f64>();
    }

    let mut scale = [0.0; N];
    sys.error_scale(y, &y_new, rtol, &mut scale);
    let ratio = err.iter().zip(&scale).fold(0.0f64, |acc, (e, sc)| acc.max(e.abs() / sc));

    if ratio.is_finite() && ratio <= 1.0 {
        let grow = if ratio == 0.0 { 4.0 } else { (0.9 * ratio.powf(-1.0 / 8.0)).clamp(0.2, 4.0) };
        *y = y_new;
        StepResult::Accepted { h_used: h, h_next: h * grow }
    } else {
        let shrink = if ratio.is_finite() { (0.9 * ratio.powf(-1.0 / 8.0)).clamp(0.1, 0.9) } else { 0.1 };
        StepResult::Rejected { h_next: h * shrink }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn tableau_rows_sum_to_nodes() {
        for (row, c) in A.iter().zip(C) {
            let s: f64 = row.iter().sum();
            assert!((s - c).abs() < 1e-14, "{s} vs {c}");
        }
        assert!((B8.iter().sum::<f64>() - 1.0).abs() < 1e-15);
    }

    struct Oscillator;

    impl System<2> for Oscillator {
        fn derivative(&self, _s: f64, y: &[f64; 2], dy: &mut [f64; 2]) {
            dy[0] = y[1];
            dy[1] = -y[0];
        }
        fn error_scale(&self, _y: &[f64; 2], _n: &[f64; 2], rtol: f64, scale: &mut [f64; 2]) {
            *scale = [rtol; 2];
        }
    }

    #[test]
    fn eighth_order_convergence() {
        let run = |steps: usize| {
            let h = 1.0 / steps as f64;
            let mut y = [1.0, 0.0];
            for i in 0..steps {
                match try_step(&Oscillator, i as f64 * h, &mut y, h, 1.0) {
                    StepResult::Accepted { .. } => {}
                    StepResult::Rejected { .. } => panic!("loose tolerance never rejects"),
                }
            }
            (y[0] - 1f64.cos()).abs()
        };
        let e1 = run(2);
        let e2 = run(4);
        let order = (e1 / e2).log2();
        assert!(order > 7.5, "observed order {order}");
    }
}
