/// Lagrange basis of degree 1 or 2 per direction on `[0, 1]³`, with
/// equispaced nodes. Local index `a + n·b + n²·c` with `n = degree + 1`.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct LagrangeBasis {
    pub degree: usize,
}

impl LagrangeBasis {
    pub fn new(degree: usize) -> Self {
        assert!((1..=2).contains(&degree), "degree must be 1 or 2");
        LagrangeBasis { degree }
    }

    pub fn n_1d(&self) -> usize {
        self.degree + 1
    }

    pub fn n_local(&self) -> usize {
        self.n_1d().pow(3)
    }

    /// Reference coordinates of local node `a`.
    pub fn node(&self, a: usize) -> [f64; 3] {
        let n = self.n_1d();
        let r = self.degree as f64;
        [(a % n) as f64 / r, ((a / n) % n) as f64 / r, (a / (n * n)) as f64 / r]
    }

    fn eval_1d(&self, x: f64) -> ([f64; 3], [f64; 3]) {
        match self.degree {
            1 => ([1.0 - x, x, 0.0], [-1.0, 1.0, 0.0]),
            _ => (
                [
                    2.0 * (x - 0.5) * (x - 1.0),
                    -4.0 * x * (x - 1.0),
                    2.0 * x * (x - 0.5),
                ],
                [4.0 * x - 3.0, 4.0 - 8.0 * x, 4.0 * x - 1.0],
            ),
        }
    }

    /// Values and reference gradients at `xi`.
    pub fn eval(&self, xi: [f64; 3], vals: &mut [f64], grads: &mut [[f64; 3]]) {
        let n = self.n_1d();
        let (vx, dx) = self.eval_1d(xi[0]);
        let (vy, dy) = self.eval_1d(xi[1]);
        let (vz, dz) = self.eval_1d(xi[2]);
        for c in 0..n {
            for b in 0..n {
                for a in 0..n {
                    let i = a + n * (b + n * c);
                    vals[i] = vx[a] * vy[b] * vz[c];
                    grads[i] = [dx[a] * vy[b] * vz[c], vx[a] * dy[b] * vz[c], vx[a] * vy[b] * dz[c]];
                }
            }
        }
    }

    pub fn values(&self, xi: [f64; 3]) -> Vec<f64> {
        let mut v = vec![0.0; self.n_local()];
        let mut g = vec![[0.0; 3]; self.n_local()];
        self.eval(xi, &mut v, &mut g);
        v
    }
}
