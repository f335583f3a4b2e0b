/// Gauss–Legendre nodes and weights on `[0, 1]`.
pub fn gauss_legendre(n: usize) -> (Vec<f64>, Vec<f64>) {
    assert!(n >= 1, "Gauss rule needs at least one point");
    let mut x = vec![0.0; n];
    let mut w = vec![0.0; n];
    for i in 0..n {
        // Chebyshev initial guess on [-1, 1], refined by Newton on P_n.
        let mut z = (std::f64::consts::PI * (i as f64 + 0.75) / (n as f64 + 0.5)).cos();
        let mut dp = 1.0;
        for _ in 0..100 {
            let (p, d) = legendre(n, z);
            dp = d;
            let dz = p / d;
            z -= dz;
            if dz.abs() < 1e-16 {
                break;
            }
        }
        let (_, d) = legendre(n, z);
        dp = if d != 0.0 { d } else { dp };
        // Map to [0, 1]; nodes come out in decreasing order, store ascending.
        x[n - 1 - i] = 0.5 * (1.0 + z);
        w[n - 1 - i] = 1.0 / ((1.0 - z * z) * dp * dp);
    }
    (x, w)
}

fn legendre(n: usize, z: f64) -> (f64, f64) {
    let (mut p0, mut p1) = (1.0, z);
    for k in 2..=n {
        let p2 = ((2 * k - 1) as f64 * z * p1 - (k - 1) as f64 * p0) / k as f64;
        p0 = p1;
        p1 = p2;
    }
    if n == 0 {
        return (1.0, 0.0);
    }
    let dp = n as f64 * (z * p1 - p0) / (z * z - 1.0);
    (p1, dp)
}

/// Tensor-product Gauss rule on the reference cube `[0, 1]³`.
#[derive(Clone, Debug)]
pub struct GaussRule {
    pub n_1d: usize,
    pub points: Vec<[f64; 3]>,
    pub weights: Vec<f64>,
}

impl GaussRule {
    pub fn new(n_1d: usize) -> Self {
        let (x, w) = gauss_legendre(n_1d);
        let mut points = Vec::with_capacity(n_1d.pow(3));
        let mut weights = Vec::with_capacity(n_1d.pow(3));
        for k in 0..n_1d {
            for j in 0..n_1d {
                for i in 0..n_1d {
                    points.push([x[i], x[j], x[k]]);
                    weights.push(w[i] * w[j] * w[k]);
                }
            }
        }
        GaussRule { n_1d, points, weights }
    }

    pub fn len(&self) -> usize {
        self.points.len()
    }

    pub fn is_empty(&self) -> bool {
        self.points.is_empty()
    }
}

/// 2D tensor Gauss rule on `[0, 1]²`, for face integrals.
pub fn face_rule(n_1d: usize) -> Vec<([f64; 2], f64)> {
    let (x, w) = gauss_legendre(n_1d);
    let mut out = Vec::with_capacity(n_1d * n_1d);
    for j in 0..n_1d {
        for i in 0..n_1d {
            out.push(([x[i], x[j]], w[i] * w[j]));
        }
    }
    out
}
