//! Tridiagonal solvers. Row `j` reads `sub[j] x[j-1] + diag[j] x[j] + sup[j] x[j+1]`.

/// Thomas elimination; `sub[0]` and `sup[m-1]` are ignored.
pub(crate) fn tridiagonal(sub: &[f64], diag: &[f64], sup: &[f64], rhs: &[f64]) -> Vec<f64> {
    let m = diag.len();
    let mut c = vec![0.0; m];
    let mut d = vec![0.0; m];
    c[0] = if m > 1 { sup[0] / diag[0] } else { 0.0 };
    d[0] = rhs[0] / diag[0];
    for j in 1..m {
        let denom = diag[j] - sub[j] * c[j - 1];
        c[j] = if j + 1 < m { sup[j] / denom } else { 0.0 };
        d[j] = (rhs[j] - sub[j] * d[j - 1]) / denom;
    }
    let mut x = vec![0.0; m];
    x[m - 1] = d[m - 1];
    for j in (0..m - 1).rev() {
        x[j] = d[j] - c[j] * x[j + 1];
    }
    x
}

/// Periodic version: `sub[0]` couples to `x[m-1]` and `sup[m-1]` to `x[0]`.
/// Uses a Sherman-Morrison correction for `m >= 3`.
pub(crate) fn cyclic_tridiagonal(sub: &[f64], diag: &[f64], sup: &[f64], rhs: &[f64]) -> Vec<f64> {
    let m = diag.len();
    match m {
        0 => return Vec::new(),
        1 => return vec![rhs[0] / (diag[0] + sub[0] + sup[0])],
        2 => {
            let (a, b) = (diag[0], sub[0] + sup[0]);
            let (c, d) = (sub[1] + sup[1], diag[1]);
            let det = a * d - b * c;
            return vec![(d * rhs[0] - b * rhs[1]) / det, (a * rhs[1] - c * rhs[0]) / det];
        }
        _ => {}
    }
    let alpha = sup[m - 1];
    let beta = sub[0];
    let gamma = -diag[0];
    let mut bb = diag.to_vec();
    bb[0] -= gamma;
    bb[m - 1] -= alpha * beta / gamma;
    let x = tridiagonal(sub, &bb, sup, rhs);
    let mut u = vec![0.0; m];
    u[0] = gamma;
    u[m - 1] = alpha;
    let z = tridiagonal(sub, &bb, sup, &u);
    let fact = (x[0] + beta * x[m - 1] / gamma) / (1.0 + z[0] + beta * z[m - 1] / gamma);
    x.iter().zip(&z).map(|(xi, zi)| xi - fact * zi).collect()
}
