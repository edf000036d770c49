//! Cubic spline interpolation of tabulated functions.

/// End condition of a cubic spline.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum EndSlope {
    /// Prescribed first derivative.
    Clamped(f64),
    /// Slope of the quadratic through the three nodes nearest to the end.
    Estimated,
}

/// Clamped cubic spline through `(x_j, y_j)`.
#[derive(Debug, Clone)]
pub struct CubicSpline {
    x: Vec<f64>,
    y: Vec<f64>,
    // Second derivatives at the nodes.
    m: Vec<f64>,
}

impl CubicSpline {
    /// `x` must be strictly increasing with at least three nodes.
    pub fn new(x: &[f64], y: &[f64], left: EndSlope, right: EndSlope) -> Self {
        let n = x.len();
        assert!(n >= 3 && y.len() == n, "spline needs >= 3 matching nodes");
        let h: Vec<f64> = x.windows(2).map(|w| w[1] - w[0]).collect();
        debug_assert!(h.iter().all(|&v| v > 0.0));

        let s0 = match left {
            EndSlope::Clamped(s) => s,
            EndSlope::Estimated => quadratic_slope([x[0], x[1], x[2]], [y[0], y[1], y[2]], x[0]),
        };
        let sn = match right {
            EndSlope::Clamped(s) => s,
            EndSlope::Estimated => quadratic_slope(
                [x[n - 3], x[n - 2], x[n - 1]],
                [y[n - 3], y[n - 2], y[n - 1]],
                x[n - 1],
            ),
        };

        let mut sub = vec![0.0; n];
        let mut diag = vec![0.0; n];
        let mut sup = vec![0.0; n];
        let mut rhs = vec![0.0; n];
        diag[0] = 2.0 * h[0];
        sup[0] = h[0];
        rhs[0] = 6.0 * ((y[1] - y[0]) / h[0] - s0);
        for i in 1..n - 1 {
            sub[i] = h[i - 1];
            diag[i] = 2.0 * (h[i - 1] + h[i]);
            sup[i] = h[i];
            rhs[i] = 6.0 * ((y[i + 1] - y[i]) / h[i] - (y[i] - y[i - 1]) / h[i - 1]);
        }
        sub[n - 1] = h[n - 2];
        diag[n - 1] = 2.0 * h[n - 2];
        rhs[n - 1] = 6.0 * (sn - (y[n - 1] - y[n - 2]) / h[n - 2]);

        // Thomas algorithm; the system is strictly diagonally dominant.
        for i in 1..n {
            let w = sub[i] / diag[i - 1];
            diag[i] -= w * sup[i - 1];
            rhs[i] -= w * rhs[i - 1];
        }
        let mut m = vec![0.0; n];
        m[n - 1] = rhs[n - 1] / diag[n - 1];
        for i in (0..n - 1).rev() {
            m[i] = (rhs[i] - sup[i] * m[i + 1]) / diag[i];
        }
        Self {
            x: x.to_vec(),
            y: y.to_vec(),
            m,
        }
    }

    pub fn nodes(&self) -> &[f64] {
        &self.x
    }

    fn cell(&self, t: f64) -> usize {
        let n = self.x.len();
        let j = self.x.partition_point(|&v| v <= t);
        j.clamp(1, n - 1) - 1
    }

    pub fn value(&self, t: f64) -> f64 {
        let i = self.cell(t);
        let h = self.x[i + 1] - self.x[i];
        let a = self.x[i + 1] - t;
        let b = t - self.x[i];
        self.m[i] * a * a * a / (6.0 * h)
            + self.m[i + 1] * b * b * b / (6.0 * h)
            + (self.y[i] / h - self.m[i] * h / 6.0) * a
            + (self.y[i + 1] / h - self.m[i + 1] * h / 6.0) * b
    }

    pub fn derivative(&self, t: f64) -> f64 {
        let i = self.cell(t);
        let h = self.x[i + 1] - self.x[i];
        let a = self.x[i + 1] - t;
        let b = t - self.x[i];
        -self.m[i] * a * a / (2.0 * h)
            + self.m[i + 1] * b * b / (2.0 * h)
            + (self.y[i + 1] - self.y[i]) / h
            - (self.m[i + 1] - self.m[i]) * h / 6.0
    }
}

fn quadratic_slope(x: [f64; 3], y: [f64; 3], at: f64) -> f64 {
    let [x0, x1, x2] = x;
    let [y0, y1, y2] = y;
    y0 * ((at - x1) + (at - x2)) / ((x0 - x1) * (x0 - x2))
        + y1 * ((at - x0) + (at - x2)) / ((x1 - x0) * (x1 - x2))
        + y2 * ((at - x0) + (at - x1)) / ((x2 - x0) * (x2 - x1))
}
